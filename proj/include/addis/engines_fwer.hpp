#pragma once

// FWER engines: ADDIS-Spending_local, ADDIS-Graph_conf (ADDIS-Graph when
// every conflict set is empty), ADDIS-Graph_conf-u, and the closed
// ADDIS-Spending / ADDIS-Graph.

#include <algorithm>
#include <map>
#include <memory>
#include <sstream>
#include <vector>

#include "addis/engine.hpp"

namespace addis {

namespace detail {

/// prefix[k] = sum_{j<=k} f(indicators of H_j), extended while indicators exist.
template <class F>
class IndicatorPrefix {
public:
    explicit IndicatorPrefix(F f) : f_(f) {}
    /// sum_{j<=k}; throws MissingIndicator if some j <= k is unobserved.
    long sum(const History& h, std::size_t k) {
        while (prefix_.size() < k) {
            const std::size_t j = prefix_.size() + 1;
            prefix_.push_back((prefix_.empty() ? 0 : prefix_.back()) + f_(h.require(j)));
        }
        return k == 0 ? 0 : prefix_[k - 1];
    }

private:
    F f_;
    std::vector<long> prefix_;
};

inline long spent_of(const Indicators& ind) { return ind.spent(); }

} // namespace detail

/// alpha_i = alpha (tau_i - lambda_i) gamma_{t_loc(i)},
/// t_loc(i) = 1 + L_i + sum_{j < i-L_i} (S_j - C_j).
class SpendingLocalEngine : public Engine {
public:
    explicit SpendingLocalEngine(EngineDefaults d = {})
        : Engine("spending-local", std::move(d), ConflictStructure::Form::Lag), spent_(detail::spent_of) {
        require_nonincreasing(defaults_.gamma, 4096);
    }

    std::size_t counter(std::size_t i) {
        const std::size_t left = hist_.conflicts.left_end(i);
        return std::size_t(1 + long(i - left) + spent_.sum(hist_, left - 1));
    }

    /// alpha times the gamma mass from the final counter on: the level still
    /// available to hypotheses after the last registered one.
    double remaining_level() {
        const std::size_t n = registered();
        const std::size_t t = std::size_t(1 + spent_.sum(hist_, n));
        return alpha() * hist_.gamma.tail(t - 1);
    }

protected:
    double compute_level(std::size_t i) override { return alpha() * gap(i) * hist_.gamma(counter(i)); }

private:
    detail::IndicatorPrefix<long (*)(const Indicators&)> spent_;
};

/// alpha_i = (tau_i - lambda_i) (alpha gamma_i + sum_{j<i} g*_{j,i} U_j alpha_j/(tau_j - lambda_j)).
class GraphConfEngine : public Engine {
public:
    GraphConfEngine(EngineDefaults d, std::unique_ptr<AdjustedWeights> weights,
                    ConflictStructure::Form form = ConflictStructure::Form::Any, std::string name = "graph-conf")
        : Engine(std::move(name), std::move(d), form), weights_(std::move(weights)) {}

    explicit GraphConfEngine(EngineDefaults d = {})
        : GraphConfEngine(std::move(d), std::make_unique<RenormalizedWeights>(std::make_unique<ShiftedGammaWeights>())) {}

    /// alpha_i / (tau_i - lambda_i)
    double scaled_level(std::size_t i) const { return tilde_.at(i - 1); }
    AdjustedWeights& weights() { return *weights_; }

    /// alpha sum_{i>n} gamma_i plus all recycled mass still routed past n.
    double remaining_level() {
        const std::size_t n = registered();
        double r = alpha() * hist_.gamma.tail(n);
        for (std::size_t j = 1; j <= std::min(n, issued_); ++j) {
            if (require(j).U() == 0) continue;
            r += tilde_[j - 1] * weights_->tail(hist_, j, n);
        }
        return r;
    }

protected:
    double compute_level(std::size_t i) override {
        double t = alpha() * hist_.gamma(i);
        for (std::size_t j = 1; j < i; ++j) {
            if (hist_.conflicts.conflicts(j, i)) {
                if ((*weights_)(hist_, j, i) != 0.0) {
                    std::ostringstream msg;
                    msg << "nonzero weight from H" << j << " to conflicting H" << i;
                    throw Error(Errc::ScheduleViolation, msg.str());
                }
                continue;
            }
            if (require(j).U() == 0) continue;
            const double w = (*weights_)(hist_, j, i);
            if (w != 0.0) t += w * tilde_[j - 1];
        }
        tilde_.push_back(t);
        return gap(i) * t;
    }

    std::unique_ptr<AdjustedWeights> weights_;
    std::vector<double> tilde_;
};

/// ADDIS-Graph_conf with the rerouted schedule over telescoping base weights.
class GraphConfUEngine : public GraphConfEngine {
public:
    explicit GraphConfUEngine(EngineDefaults d = {})
        : GraphConfEngine(std::move(d), std::make_unique<ReroutedWeights>(), ConflictStructure::Form::Lag,
                          "graph-conf-u") {
        require_nonincreasing(defaults_.gamma, 4096);
    }
};

/// alpha_i = alpha (tau_i - lambda_i) gamma_{t_cloc(i)},
/// t_cloc(i) = 1 + sum_{j=i-L_i}^{i-1} (1 - R_j) + sum_{j<i-L_i} (S_j - max(R_j, C_j)).
class ClosedSpendingEngine : public Engine {
public:
    explicit ClosedSpendingEngine(EngineDefaults d = {})
        : Engine("closed-spending", std::move(d), ConflictStructure::Form::Lag), spent_(closed_spent) {
        require_nonincreasing(defaults_.gamma, 4096);
    }

    std::size_t counter(std::size_t i) {
        const std::size_t left = hist_.conflicts.left_end(i);
        long t = 1 + spent_.sum(hist_, left - 1);
        for (std::size_t j = left; j < i; ++j) t += require(j).R ? 0 : 1;
        return std::size_t(t);
    }

    double remaining_level() {
        const std::size_t t = std::size_t(1 + spent_.sum(hist_, registered()));
        return alpha() * hist_.gamma.tail(t - 1);
    }

protected:
    double compute_level(std::size_t i) override { return alpha() * gap(i) * hist_.gamma(counter(i)); }

private:
    static long closed_spent(const Indicators& ind) { return long(ind.S) - long(std::max(ind.R, ind.C)); }
    detail::IndicatorPrefix<long (*)(const Indicators&)> spent_;
};

/// alpha_i = (tau_i - lambda_i) (alpha gamma_i + sum_{j=i-L_i}^{i-1} g_{j,i} R_j a_j
///           + sum_{j<i-L_i} g_{j,i} (max(R_j,C_j) - S_j + 1) a_j),  a_j = alpha_j/(tau_j - lambda_j).
/// The base weights g include conflicting pairs; a row may be replaced until
/// the level of its source is issued.
class ClosedGraphEngine : public Engine {
public:
    explicit ClosedGraphEngine(EngineDefaults d = {}, std::unique_ptr<BaseWeights> base = nullptr)
        : Engine("closed-graph", std::move(d), ConflictStructure::Form::Lag),
          base_(base ? std::move(base) : std::make_unique<ShiftedGammaWeights>()) {}

    void set_base_row(std::size_t j, std::map<std::size_t, double> row) {
        if (j <= issued_) {
            std::ostringstream msg;
            msg << "row " << j << " is frozen: its level has been issued";
            throw Error(Errc::FrozenRowViolation, msg.str());
        }
        double s = 0.0;
        for (const auto& [i, w] : row) {
            if (i <= j || !(w >= 0.0)) throw Error(Errc::InvalidSpec, "row entries need i > j and weight >= 0");
            s += w;
        }
        if (s > 1.0 + 1e-12) throw Error(Errc::InvalidSpec, "row sums to more than 1");
        overrides_[j] = std::move(row);
    }

    double scaled_level(std::size_t i) const { return tilde_.at(i - 1); }

    double remaining_level() {
        const std::size_t n = registered();
        double r = alpha() * hist_.gamma.tail(n);
        for (std::size_t j = 1; j <= std::min(n, issued_); ++j) {
            const auto& ind = require(j);
            if (std::max(ind.R, ind.C) - int(ind.S) + 1 == 0) continue;
            auto o = overrides_.find(j);
            double tail = 0.0;
            if (o == overrides_.end()) {
                tail = base_->tail(hist_, j, n);
            } else {
                for (auto it = o->second.upper_bound(n); it != o->second.end(); ++it) tail += it->second;
            }
            r += tilde_[j - 1] * tail;
        }
        return r;
    }

protected:
    double compute_level(std::size_t i) override {
        const std::size_t left = hist_.conflicts.left_end(i);
        double t = alpha() * hist_.gamma(i);
        for (std::size_t j = 1; j < i; ++j) {
            const auto& ind = require(j);
            const int carry = j >= left ? int(ind.R) : std::max(int(ind.R), int(ind.C)) - int(ind.S) + 1;
            if (carry == 0) continue;
            const double w = weight(j, i);
            if (w != 0.0) t += w * carry * tilde_[j - 1];
        }
        tilde_.push_back(t);
        return gap(i) * t;
    }

private:
    double weight(std::size_t j, std::size_t i) {
        auto o = overrides_.find(j);
        if (o == overrides_.end()) return (*base_)(hist_, j, i);
        auto c = o->second.find(i);
        return c == o->second.end() ? 0.0 : c->second;
    }

    std::unique_ptr<BaseWeights> base_;
    std::map<std::size_t, std::map<std::size_t, double>> overrides_;
    std::vector<double> tilde_;
};

} // namespace addis
