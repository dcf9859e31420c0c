#pragma once

// Adaptive-Graph_corr (batch dependence, tau = 1, exploits the joint null
// distribution inside a batch) and FDR-ADDIS-Graph_conf.

#include <algorithm>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include "addis/alpha_c.hpp"
#include "addis/engine.hpp"

namespace addis {

inline EngineDefaults fdr_defaults(GammaSpec gamma = GammaSpec::basel()) { return {0.05, 0.5, 0.25, std::move(gamma)}; }
inline EngineDefaults corr_defaults(GammaSpec gamma = GammaSpec::basel()) { return {0.2, 1.0, 0.2, std::move(gamma)}; }

/// alpha_i = min(hat_i, lambda_i) with
/// hat_i = (tau_i - lambda_i) (W0 gamma_i + sum_j g*_{j,i} U_j hat_j/(tau_j - lambda_j)
///                             + sum_j h*_{j,i} R_j [alpha K_j + (alpha - W0)(1 - K_j)]),
/// K_j = 1 iff some H_k with k < j was rejected.
class FdrGraphEngine : public Engine {
public:
    FdrGraphEngine(EngineDefaults d, double w0, std::unique_ptr<AdjustedWeights> g_star,
                   std::unique_ptr<AdjustedWeights> h_star = nullptr)
        : Engine("fdr-graph", std::move(d), ConflictStructure::Form::Any), w0_(w0), g_(std::move(g_star)),
          h_(h_star ? std::move(h_star) : reward_weights(*g_)) {
        if (!(w0 > 0.0 && w0 <= alpha())) throw Error(Errc::InvalidW0, "W0 must lie in (0, alpha]");
    }

    explicit FdrGraphEngine(EngineDefaults d = fdr_defaults())
        : FdrGraphEngine(d, d.alpha, std::make_unique<RenormalizedWeights>(std::make_unique<ShiftedGammaWeights>())) {}

    double w0() const { return w0_; }
    /// Unclipped level hat_i.
    double hat_level(std::size_t i) const { return hat_.at(i - 1); }

    /// K_j; throws MissingIndicator when an unobserved earlier index could decide it.
    bool rejection_memory(std::size_t j) const {
        if (first_rejection_ && *first_rejection_ < j) return true;
        for (std::size_t k = 1; k < j; ++k) require(k);
        return false;
    }

    /// Reward released when H_j is rejected.
    double reward(std::size_t j) const {
        return rejection_memory(j) ? alpha() : alpha() - w0_;
    }

protected:
    double compute_level(std::size_t i) override {
        double t = w0_ * hist_.gamma(i);
        for (std::size_t j = 1; j < i; ++j) {
            if (hist_.conflicts.conflicts(j, i)) continue;
            const auto& ind = require(j);
            if (ind.U() == 1) {
                const double w = (*g_)(hist_, j, i);
                if (w != 0.0) t += w * hat_[j - 1] / gap(j);
            }
            if (ind.R) {
                const double r = reward(j);
                if (r != 0.0) {
                    const double w = (*h_)(hist_, j, i);
                    if (w != 0.0) t += w * r;
                }
            }
        }
        const double hat = gap(i) * t;
        hat_.push_back(hat);
        return std::min(hat, records_[i - 1].lambda);
    }

    void after_observe(std::size_t i) override {
        if (hist_.indicators[i - 1]->R && (!first_rejection_ || i < *first_rejection_)) first_rejection_ = i;
    }

private:
    double w0_;
    std::unique_ptr<AdjustedWeights> g_;
    std::unique_ptr<AdjustedWeights> h_;
    std::vector<double> hat_;
    std::optional<std::size_t> first_rejection_;
};

/// alpha_i = (1 - lambda_{b_i}) (alpha gamma_i + sum_{b_j < b_i} g*_{j,i} [C_j alpha_j
///           + (1 - C_j)(alpha_j - alpha^c_j)] / (1 - lambda_{b_j})).
/// alpha^c of a batch is computed once, when the first level of a later batch
/// is requested (or on finalize()), and never recomputed.
class AdaptiveGraphCorrEngine : public Engine {
public:
    AdaptiveGraphCorrEngine(EngineDefaults d, std::unique_ptr<NullModel> model,
                            std::unique_ptr<AdjustedWeights> g_star = nullptr)
        : Engine("adaptive-graph-corr", std::move(d), ConflictStructure::Form::Batch), model_(std::move(model)),
          g_(g_star ? std::move(g_star)
                    : std::make_unique<RenormalizedWeights>(std::make_unique<ShiftedGammaWeights>())) {
        if (!model_) throw Error(Errc::ModelUnavailable, "no null model for alpha^c");
        if (defaults_.tau != 1.0) throw Error(Errc::InvalidConfig, "correlation-exploiting engine requires tau = 1");
    }

    /// Freezes alpha^c for every complete batch not yet frozen.
    void finalize() {
        std::size_t k = frozen_ + 1;
        while (k <= issued_) {
            const std::size_t b = hist_.conflicts.batch_of(k);
            std::size_t end = k;
            while (end + 1 <= registered() && hist_.conflicts.batch_of(end + 1) == b) ++end;
            if (end > issued_) return;
            for (std::size_t m = k; m <= end; ++m)
                if (!hist_.observed(m)) return;
            freeze_batch(k, end);
            k = end + 1;
        }
    }

    void finish() override { finalize(); }

    std::optional<double> alpha_c(std::size_t j) const {
        return j <= alpha_c_.size() ? std::optional(alpha_c_[j - 1]) : std::nullopt;
    }
    double alpha_c_std_error(std::size_t j) const { return alpha_c_se_.at(j - 1); }

    TrajectoryLedger ledger() const override {
        auto l = Engine::ledger();
        for (auto& e : l.entries())
            if (e.index <= alpha_c_.size()) e.alpha_c = alpha_c_[e.index - 1];
        return l;
    }

protected:
    void validate_registration(const HypothesisRecord& rec) override {
        if (rec.tau != 1.0) throw Error(Errc::InvalidSpec, "tau must be 1 for every hypothesis");
    }

    double compute_level(std::size_t i) override {
        const std::size_t start = hist_.conflicts.batch_start(i);
        if (i > 1 && start == i) {
            // H_i opens a new batch (lambda may change here); all earlier batches must be complete
            std::size_t k = frozen_ + 1;
            while (k < start) {
                const std::size_t s = hist_.conflicts.batch_start(k);
                std::size_t end = k;
                while (end + 1 < start && hist_.conflicts.batch_start(end + 1) == s) ++end;
                for (std::size_t m = k; m <= end; ++m) {
                    if (!hist_.observed(m)) {
                        std::ostringstream msg;
                        msg << "batch containing H" << m << " is incomplete";
                        throw Error(Errc::BatchIncomplete, msg.str());
                    }
                }
                freeze_batch(k, end);
                k = end + 1;
            }
        } else if (i > 1 && records_[i - 2].lambda != records_[i - 1].lambda) {
            throw Error(Errc::InvalidSpec, "lambda must be constant within a batch");
        }
        double t = alpha() * hist_.gamma(i);
        for (std::size_t j = 1; j < start; ++j) {
            const double w = (*g_)(hist_, j, i);
            if (w == 0.0) continue;
            const double aj = *records_[j - 1].level;
            const double carried = require(j).C ? aj : aj - alpha_c_[j - 1];
            t += w * carried / (1.0 - records_[j - 1].lambda);
        }
        return (1.0 - records_[i - 1].lambda) * t;
    }

private:
    void freeze_batch(std::size_t first, std::size_t last) {
        std::vector<PriorLevel> prior;
        for (std::size_t m = first; m <= last; ++m) {
            const double a = *records_[m - 1].level;
            const auto res = model_->alpha_c(prior, m - first, a);
            alpha_c_.push_back(res.value);
            alpha_c_se_.push_back(res.std_error);
            if (!require(m).C) prior.push_back({m - first, a});
        }
        frozen_ = last;
    }

    std::unique_ptr<NullModel> model_;
    std::unique_ptr<AdjustedWeights> g_;
    std::vector<double> alpha_c_;
    std::vector<double> alpha_c_se_;
    std::size_t frozen_ = 0;
};

} // namespace addis
