#pragma once

// Sequential engine interface shared by all procedures: hypotheses are
// registered with their conflict sets, levels are issued strictly in index
// order and never change, and p-values may be reported in any order.

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addis/core.hpp"
#include "addis/gamma.hpp"
#include "addis/weights.hpp"

namespace addis {

/// Registration payload; unset tau/lambda fall back to the engine defaults.
struct HypothesisSpec {
    std::optional<double> tau = {};
    std::optional<double> lambda = {};
    std::vector<std::size_t> conflicts = {};
};

struct Decision {
    std::size_t index = 0;
    double p = 0.0;
    double level = 0.0;
    Indicators indicators;
    bool reject() const { return indicators.R; }
};

struct EngineDefaults {
    double alpha = 0.2;
    double tau = 0.8;
    double lambda = 0.16;
    GammaSpec gamma = GammaSpec::basel();
};

inline constexpr double min_tau_lambda_gap = 1e-6;

class Engine {
public:
    Engine(std::string procedure, EngineDefaults defaults, ConflictStructure::Form form)
        : procedure_(std::move(procedure)), defaults_(std::move(defaults)), form_(form), hist_(defaults_.gamma) {
        if (!(defaults_.alpha > 0.0 && defaults_.alpha < 1.0))
            throw Error(Errc::InvalidConfig, "alpha must lie in (0,1)");
        check_thresholds(defaults_.tau, defaults_.lambda, 0);
    }
    virtual ~Engine() = default;
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Appends H_{n+1}; returns its index.
    std::size_t register_hypothesis(const HypothesisSpec& spec) {
        const std::size_t i = hist_.size() + 1;
        HypothesisRecord rec;
        rec.index = i;
        rec.tau = spec.tau.value_or(defaults_.tau);
        rec.lambda = spec.lambda.value_or(defaults_.lambda);
        check_thresholds(rec.tau, rec.lambda, i);
        validate_registration(rec);
        hist_.conflicts.append(spec.conflicts, form_);
        rec.conflict_set = hist_.conflicts.set(i);
        records_.push_back(std::move(rec));
        hist_.indicators.emplace_back();
        return i;
    }

    /// alpha_i; levels are issued in index order and cached.
    double level(std::size_t i) {
        if (i >= 1 && i <= issued_) return *records_[i - 1].level;
        if (i != issued_ + 1 || i > records_.size()) {
            std::ostringstream msg;
            msg << "level of H" << i << " requested; next issuable index is " << issued_ + 1 << " of "
                << records_.size() << " registered";
            throw Error(Errc::UnknownIndex, msg.str());
        }
        const double a = compute_level(i);
        auto& rec = records_[i - 1];
        rec.level = a;
        ++issued_;
        if (a > rec.lambda) {
            std::ostringstream msg;
            msg << "level of H" << i << " (" << a << ") exceeds lambda (" << rec.lambda << ")";
            warnings_.push_back(msg.str());
        }
        after_level(i);
        return a;
    }

    /// Registers the next hypothesis and issues its level.
    double next(const HypothesisSpec& spec = {}) { return level(register_hypothesis(spec)); }

    Decision observe(std::size_t i, double p) {
        if (i < 1 || i > issued_) {
            std::ostringstream msg;
            msg << "H" << i << " has no issued level";
            throw Error(Errc::UnknownIndex, msg.str());
        }
        auto& rec = records_[i - 1];
        if (rec.p_value) {
            std::ostringstream msg;
            msg << "H" << i << " already observed";
            throw Error(Errc::DuplicateObservation, msg.str());
        }
        const Indicators ind = compute_indicators(p, rec.tau, rec.lambda, *rec.level);
        rec.p_value = p;
        hist_.indicators[i - 1] = ind;
        after_observe(i);
        return Decision{i, p, *rec.level, ind};
    }

    std::size_t registered() const { return records_.size(); }
    std::size_t issued() const { return issued_; }
    const HypothesisRecord& record(std::size_t i) const { return records_.at(i - 1); }
    const std::optional<Indicators>& indicators(std::size_t i) const { return hist_.indicators.at(i - 1); }
    const History& history() const { return hist_; }
    const ConflictStructure& conflicts() const { return hist_.conflicts; }
    double alpha() const { return defaults_.alpha; }
    const EngineDefaults& defaults() const { return defaults_; }
    const std::string& procedure() const { return procedure_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Called once the feed is over; engines with deferred bookkeeping settle it here.
    virtual void finish() {}

    /// Issued levels with whatever indicators have been reported.
    virtual TrajectoryLedger ledger() const {
        TrajectoryLedger l;
        for (std::size_t i = 1; i <= issued_; ++i) {
            const auto& r = records_[i - 1];
            LedgerEntry e;
            e.index = i;
            e.level = *r.level;
            e.tau = r.tau;
            e.lambda = r.lambda;
            e.gap = r.tau - r.lambda;
            e.indicators = hist_.indicators[i - 1];
            l.append(std::move(e));
        }
        return l;
    }

protected:
    virtual double compute_level(std::size_t i) = 0;
    virtual void validate_registration(const HypothesisRecord&) {}
    virtual void after_level(std::size_t) {}
    virtual void after_observe(std::size_t) {}

    double gap(std::size_t j) const { return records_[j - 1].tau - records_[j - 1].lambda; }
    const Indicators& require(std::size_t j) const { return hist_.require(j); }

    std::string procedure_;
    EngineDefaults defaults_;
    ConflictStructure::Form form_;
    History hist_;
    std::vector<HypothesisRecord> records_;
    std::size_t issued_ = 0;
    std::vector<std::string> warnings_;

private:
    static void check_thresholds(double tau, double lambda, std::size_t i) {
        std::ostringstream where;
        if (i) where << " for H" << i;
        if (!(tau > 0.0 && tau <= 1.0)) throw Error(Errc::InvalidConfig, "tau must lie in (0,1]" + where.str());
        if (!(lambda >= 0.0 && lambda < tau))
            throw Error(Errc::InvalidConfig, "lambda must lie in [0, tau)" + where.str());
        if (tau - lambda < min_tau_lambda_gap)
            throw Error(Errc::InvalidConfig, "tau - lambda below 1e-6" + where.str());
    }
};

} // namespace addis
