#pragma once

// Shared domain types: test indicators, conflict structures, the trajectory
// ledger and the three budget conditions that certify error control on a
// realized trajectory. Indices are 1-based throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addis/errors.hpp"

namespace addis {

/// Outcome bits of one test: S = 1{P <= tau}, C = 1{P <= lambda}, R = 1{P <= alpha}.
struct Indicators {
    bool S = false;
    bool C = false;
    bool R = false;

    /// U = C - S + 1: 1 when the level is recycled (candidate or discarded), 0 when it is spent.
    int U() const { return int(C) - int(S) + 1; }
    /// S - C: 1 when the level is spent.
    int spent() const { return int(S) - int(C); }

    friend bool operator==(const Indicators&, const Indicators&) = default;
};

/// Thresholds are closed: ties count as hits.
inline Indicators compute_indicators(double p, double tau, double lambda, double alpha) {
    if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream msg;
        msg << "p-value " << p << " outside [0,1]";
        throw Error(Errc::DomainError, msg.str());
    }
    return Indicators{p <= tau, p <= lambda, p <= alpha};
}

/// Per-hypothesis parameters and, once known, level and p-value.
struct HypothesisRecord {
    std::size_t index = 0;
    double tau = 1.0;
    double lambda = 0.0;
    std::vector<std::size_t> conflict_set;
    std::optional<double> p_value;
    std::optional<double> level;
};

// ---------------------------------------------------------------------------
// Conflict structures
// ---------------------------------------------------------------------------

/// Conflict sets X_1, X_2, ... with the derived forms the engines need:
/// lags (when every X_i is a contiguous suffix {i-L_i, ..., i-1}), finish
/// times for asynchronous structures, and batch membership for block
/// dependence.
class ConflictStructure {
public:
    ConflictStructure() = default;

    /// Raw sets; call validate_conflicts() before handing the result to an engine.
    static ConflictStructure from_sets(std::vector<std::vector<std::size_t>> sets) {
        ConflictStructure s;
        for (std::size_t k = 0; k < sets.size(); ++k) normalize(sets[k], k + 1);
        s.raw_ = std::move(sets);
        return s;
    }

    /// X_i = {i-L_i, ..., i-1}.
    static ConflictStructure from_lags(std::span<const std::size_t> lags) {
        ConflictStructure s;
        for (std::size_t k = 0; k < lags.size(); ++k) {
            const std::size_t i = k + 1;
            if (lags[k] > i - 1) {
                std::ostringstream msg;
                msg << "lag L_" << i << " = " << lags[k] << " exceeds " << i - 1;
                throw Error(Errc::InvalidSpec, msg.str());
            }
            std::vector<std::size_t> set;
            for (std::size_t j = i - lags[k]; j < i; ++j) set.push_back(j);
            s.append(std::move(set));
        }
        return s;
    }

    /// X_i = {j < i : E_j >= i}.
    static ConflictStructure from_finish_times(std::span<const std::size_t> finish) {
        const std::size_t n = finish.size();
        std::vector<std::vector<std::size_t>> sets(n);
        for (std::size_t j = 1; j <= n; ++j) {
            if (finish[j - 1] < j) {
                std::ostringstream msg;
                msg << "finish time E_" << j << " = " << finish[j - 1] << " precedes its own index";
                throw Error(Errc::InvalidSpec, msg.str());
            }
            for (std::size_t i = j + 1; i <= std::min(n, finish[j - 1]); ++i) sets[i - 1].push_back(j);
        }
        ConflictStructure s;
        for (auto& set : sets) s.append(std::move(set));
        s.finish_ = std::vector<std::size_t>(finish.begin(), finish.end());
        return s;
    }

    /// Consecutive blocks of the given sizes; every pair inside a block conflicts.
    static ConflictStructure from_batches(std::span<const std::size_t> sizes) {
        std::vector<std::size_t> lags;
        for (std::size_t b : sizes) {
            if (b == 0) throw Error(Errc::InvalidSpec, "empty batch");
            for (std::size_t pos = 0; pos < b; ++pos) lags.push_back(pos);
        }
        return from_lags(lags);
    }

    /// Lags of the union of block dependence (batch size b) and a constant
    /// test duration e: L_i = max(position of i in its batch, min(e, i-1)).
    static std::vector<std::size_t> batched_delay_lags(std::size_t n, std::size_t b, std::size_t e) {
        if (b == 0 || n % b != 0) throw Error(Errc::InvalidConfig, "n must be a positive multiple of the batch size");
        std::vector<std::size_t> lags(n);
        for (std::size_t i = 1; i <= n; ++i) lags[i - 1] = std::max((i - 1) % b, std::min(e, i - 1));
        return lags;
    }

    std::size_t size() const { return sets_.size(); }
    bool empty() const { return sets_.empty(); }

    const std::vector<std::size_t>& set(std::size_t i) const { return sets_.at(i - 1); }

    bool conflicts(std::size_t j, std::size_t i) const {
        if (j >= i) return false;
        if (lag_form_) return j >= left_[i - 1];
        const auto& s = sets_.at(i - 1);
        return std::binary_search(s.begin(), s.end(), j);
    }

    /// True when every set is a contiguous suffix.
    bool is_lag_form() const { return lag_form_; }

    std::size_t lag(std::size_t i) const {
        require_lag_form();
        return i - left_.at(i - 1);
    }
    /// i - L_i, the smallest index that conflicts with H_i (or i itself when X_i is empty).
    std::size_t left_end(std::size_t i) const {
        require_lag_form();
        return left_.at(i - 1);
    }
    std::vector<std::size_t> lags() const {
        require_lag_form();
        std::vector<std::size_t> out(sets_.size());
        for (std::size_t i = 1; i <= sets_.size(); ++i) out[i - 1] = i - left_[i - 1];
        return out;
    }

    const std::optional<std::vector<std::size_t>>& finish_times() const { return finish_; }

    bool is_batch_form() const { return batch_form_; }
    /// 1-based batch id.
    std::size_t batch_of(std::size_t i) const {
        if (!batch_form_) throw Error(Errc::InvalidSpec, "conflict structure is not in batch form");
        return batch_of_.at(i - 1);
    }
    /// First index of the batch containing i.
    std::size_t batch_start(std::size_t i) const {
        if (!batch_form_) throw Error(Errc::InvalidSpec, "conflict structure is not in batch form");
        return left_.at(i - 1);
    }

    /// d_j = min{i > j : j not in X_i} among the indices registered so far.
    std::optional<std::size_t> first_free(std::size_t j) const {
        const std::size_t n = sets_.size();
        if (lag_form_) {
            // left ends are nondecreasing, so the first i with left_end(i) > j is found by bisection
            if (j >= n) return std::nullopt;
            auto it = std::upper_bound(left_.begin() + std::ptrdiff_t(j), left_.end(), j);
            if (it == left_.end()) return std::nullopt;
            return std::size_t(it - left_.begin()) + 1;
        }
        for (std::size_t i = j + 1; i <= n; ++i)
            if (!conflicts(j, i)) return i;
        return std::nullopt;
    }

    enum class Form { Any, Lag, Batch };

    /// Appends X_{n+1}, checking monotonicity against X_n and updating the
    /// derived lag and batch forms. With a required form the structure is
    /// left untouched when the new set would break it.
    void append(std::vector<std::size_t> set, Form required = Form::Any) {
        if (!raw_.empty()) derive();
        const std::size_t i = sets_.size() + 1;
        normalize(set, i);
        if (required != Form::Any) {
            const bool contiguous = set.empty() || (set.back() == i - 1 && set.back() - set.front() + 1 == set.size());
            if (!lag_form_ || !contiguous) {
                std::ostringstream msg;
                msg << "conflict set of H" << i << " is not a contiguous suffix";
                throw Error(Errc::NonContiguousSuffix, msg.str());
            }
            if (required == Form::Batch && !set.empty() && (!batch_form_ || set.front() != left_.back())) {
                std::ostringstream msg;
                msg << "conflict set of H" << i << " does not continue the current batch";
                throw Error(Errc::InvalidSpec, msg.str());
            }
        }
        if (i >= 2) {
            const auto& prev = sets_.back();
            for (std::size_t j : set) {
                if (j + 1 == i) continue;
                if (!std::binary_search(prev.begin(), prev.end(), j)) {
                    std::ostringstream msg;
                    msg << "j=" << j << " is in X_" << i << " but not in X_" << i - 1 << " (triple " << j << " < "
                        << i - 1 << " < " << i << ")";
                    throw Error(Errc::NonMonotoneConflicts, msg.str());
                }
            }
        }
        const bool contiguous = set.empty() || (set.back() == i - 1 && set.back() - set.front() + 1 == set.size());
        if (lag_form_ && contiguous) {
            const std::size_t left = set.empty() ? i : set.front();
            if (batch_form_) {
                if (left == i) {
                    batch_of_.push_back(batch_of_.empty() ? 1 : batch_of_.back() + 1);
                } else if (left == left_.back()) {
                    batch_of_.push_back(batch_of_.back());
                } else {
                    batch_form_ = false;
                    batch_of_.clear();
                }
            }
            left_.push_back(left);
        } else {
            lag_form_ = batch_form_ = false;
            left_.clear();
            batch_of_.clear();
        }
        sets_.push_back(std::move(set));
    }

    friend ConflictStructure validate_conflicts(ConflictStructure structure, bool require_lag_form);

private:
    static void normalize(std::vector<std::size_t>& set, std::size_t i) {
        std::sort(set.begin(), set.end());
        set.erase(std::unique(set.begin(), set.end()), set.end());
        for (std::size_t j : set) {
            if (j < 1 || j >= i) {
                std::ostringstream msg;
                msg << "conflict set of H" << i << " contains " << j << ", outside {1,...," << i - 1 << "}";
                throw Error(Errc::InvalidSpec, msg.str());
            }
        }
    }

    void require_lag_form() const {
        if (!lag_form_) throw Error(Errc::NonContiguousSuffix, "conflict sets are not contiguous suffixes");
    }

    /// Replays raw sets through append().
    void derive() {
        ConflictStructure fresh;
        for (auto& set : raw_) fresh.append(std::move(set));
        fresh.finish_.swap(finish_);
        *this = std::move(fresh);
    }

    std::vector<std::vector<std::size_t>> raw_;  // unvalidated input from from_sets
    std::vector<std::vector<std::size_t>> sets_;
    std::vector<std::size_t> left_;
    std::vector<std::size_t> batch_of_;
    bool lag_form_ = true;
    bool batch_form_ = true;
    std::optional<std::vector<std::size_t>> finish_;
};

/// Checks monotonicity and derives lags and batches. With require_lag_form,
/// sets with gaps are rejected.
inline ConflictStructure validate_conflicts(ConflictStructure structure, bool require_lag_form = false) {
    if (!structure.raw_.empty()) structure.derive();
    if (require_lag_form) structure.require_lag_form();
    return structure;
}

/// Smallest enclosing lag form: L_i = i - min(X_i). Monotone sets map to
/// monotone lags.
inline ConflictStructure lag_closure(const ConflictStructure& s) {
    std::vector<std::size_t> lags(s.size());
    for (std::size_t i = 1; i <= s.size(); ++i) lags[i - 1] = s.set(i).empty() ? 0 : i - s.set(i).front();
    return validate_conflicts(ConflictStructure::from_lags(lags), true);
}

// ---------------------------------------------------------------------------
// Trajectory ledger and budget conditions
// ---------------------------------------------------------------------------

struct LedgerEntry {
    std::size_t index = 0;
    double level = 0.0;
    double tau = 1.0;
    double lambda = 0.0;
    double gap = 1.0;  // tau - lambda as used by the engine
    std::optional<Indicators> indicators;
    std::optional<double> alpha_c;
};

class TrajectoryLedger {
public:
    void append(LedgerEntry e) {
        if (e.index != entries_.size() + 1) {
            std::ostringstream msg;
            msg << "ledger expects index " << entries_.size() + 1 << ", got " << e.index;
            throw Error(Errc::InvalidSpec, msg.str());
        }
        entries_.push_back(std::move(e));
    }

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    std::vector<LedgerEntry>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const LedgerEntry& at(std::size_t i) const { return entries_.at(i - 1); }

    /// Left-hand side of the ADDIS condition for every prefix.
    std::vector<double> prefix_spend() const {
        std::vector<double> out;
        out.reserve(entries_.size());
        double acc = 0.0;
        for (const auto& e : entries_) {
            const auto& ind = require(e);
            acc += e.level / e.gap * ind.spent();
            out.push_back(acc);
        }
        return out;
    }

    /// |R(i)| for every prefix.
    std::vector<std::size_t> prefix_rejections() const {
        std::vector<std::size_t> out;
        out.reserve(entries_.size());
        std::size_t acc = 0;
        for (const auto& e : entries_) {
            acc += require(e).R ? 1 : 0;
            out.push_back(acc);
        }
        return out;
    }

    static const Indicators& require(const LedgerEntry& e) {
        if (!e.indicators) {
            std::ostringstream msg;
            msg << "no indicators recorded for index " << e.index;
            throw Error(Errc::IncompleteLedger, msg.str());
        }
        return *e.indicators;
    }

private:
    std::vector<LedgerEntry> entries_;
};

/// Outcome of a budget-condition check. worst_index is the prefix with the
/// largest excess (spend minus allowance); 0 for an empty ledger.
struct ConditionReport {
    bool pass = true;
    double max_spend = 0.0;
    std::size_t worst_index = 0;
    double worst_excess = 0.0;
};

namespace detail {

template <class Allowance>
ConditionReport check_prefixes(const std::vector<double>& spend, Allowance&& allowance, double tol) {
    ConditionReport rep;
    if (spend.empty()) return rep;
    rep.worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spend.size(); ++k) {
        const double excess = spend[k] - allowance(k);
        rep.max_spend = std::max(rep.max_spend, spend[k]);
        if (excess > rep.worst_excess) {
            rep.worst_excess = excess;
            rep.worst_index = k + 1;
        }
    }
    rep.pass = rep.worst_excess <= tol;
    return rep;
}

} // namespace detail

inline constexpr double default_condition_tol = 1e-10;

/// sum_{j<=i} alpha_j/(tau_j-lambda_j) (S_j - C_j) <= alpha for every prefix i.
inline ConditionReport check_fwer_condition(const TrajectoryLedger& ledger, double alpha,
                                            double tol = default_condition_tol) {
    const auto spend = ledger.prefix_spend();
    return detail::check_prefixes(spend, [&](std::size_t) { return alpha; }, tol);
}

/// Same spend bounded by alpha * max(|R(i)|, 1).
inline ConditionReport check_fdr_condition(const TrajectoryLedger& ledger, double alpha,
                                           double tol = default_condition_tol) {
    const auto spend = ledger.prefix_spend();
    const auto rej = ledger.prefix_rejections();
    return detail::check_prefixes(
        spend, [&](std::size_t k) { return alpha * double(std::max<std::size_t>(rej[k], 1)); }, tol);
}

/// sum_{j<=i} alpha^c_j/(1-lambda_{b_j}) (1 - C_j) <= alpha, for batch
/// procedures with tau = 1.
inline ConditionReport check_corr_condition(const TrajectoryLedger& ledger, double alpha,
                                            double tol = default_condition_tol) {
    std::vector<double> spend;
    spend.reserve(ledger.size());
    double acc = 0.0;
    for (const auto& e : ledger.entries()) {
        const auto& ind = TrajectoryLedger::require(e);
        if (e.tau != 1.0) throw Error(Errc::InvalidSpec, "correlation condition requires tau = 1");
        if (!e.alpha_c) {
            std::ostringstream msg;
            msg << "alpha^c missing for index " << e.index;
            throw Error(Errc::MissingAlphaC, msg.str());
        }
        acc += *e.alpha_c / (1.0 - e.lambda) * (ind.C ? 0.0 : 1.0);
        spend.push_back(acc);
    }
    return detail::check_prefixes(spend, [&](std::size_t) { return alpha; }, tol);
}

} // namespace addis
