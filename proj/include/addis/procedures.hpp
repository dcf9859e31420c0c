#pragma once

// Name-based construction of engines, shared by the simulator, the stream
// session and the replay tool.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "addis/engines_ext.hpp"
#include "addis/engines_fwer.hpp"

namespace addis {

/// Which budget condition a procedure's trajectories must satisfy.
enum class ErrorCriterion { Fwer, Fdr, Corr };

struct ProcedureInfo {
    std::string name;
    ErrorCriterion criterion;
    bool lag_form_only;  // conflict sets must be contiguous suffixes
    bool batch_form_only;
    bool reads_window_decisions;  // uses R_j of conflicting j, so X_i may only encode dependence
};

inline const std::vector<ProcedureInfo>& procedure_catalog() {
    static const std::vector<ProcedureInfo> cat{
        {"spending-local", ErrorCriterion::Fwer, true, false, false},
        {"graph-conf", ErrorCriterion::Fwer, false, false, false},
        {"graph-conf-u", ErrorCriterion::Fwer, true, false, false},
        {"closed-spending", ErrorCriterion::Fwer, true, false, true},
        {"closed-graph", ErrorCriterion::Fwer, true, false, true},
        {"adaptive-graph-conf", ErrorCriterion::Fwer, false, false, false},
        {"adaptive-graph-corr", ErrorCriterion::Corr, false, true, false},
        {"fdr-graph", ErrorCriterion::Fdr, false, false, false},
    };
    return cat;
}

inline const ProcedureInfo& procedure_info(const std::string& name) {
    for (const auto& p : procedure_catalog())
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : procedure_catalog()) known += (known.empty() ? "" : ", ") + p.name;
    throw Error(Errc::InvalidConfig, "unknown procedure '" + name + "' (known: " + known + ")");
}

struct ProcedureSpec {
    std::string name = "graph-conf";
    EngineDefaults defaults;
    std::optional<double> w0;  // fdr-graph; defaults to alpha
    double rho = 0.5;          // adaptive-graph-corr: within-batch correlation of the null model
};

/// Default alpha, tau and lambda per procedure family: alpha = 0.2, tau = 0.8,
/// lambda = alpha tau for FWER engines; tau = 1, lambda = alpha for the
/// adaptive pair; alpha = 0.05, tau = 0.5, lambda = 0.25 for fdr-graph.
inline EngineDefaults resolve_defaults(const std::string& name, std::optional<double> alpha, std::optional<double> tau,
                                       std::optional<double> lambda, GammaSpec gamma) {
    const auto& info = procedure_info(name);
    EngineDefaults d;
    d.gamma = std::move(gamma);
    if (info.criterion == ErrorCriterion::Fdr) {
        d.alpha = alpha.value_or(0.05);
        d.tau = tau.value_or(0.5);
        d.lambda = lambda.value_or(0.25);
    } else if (name == "adaptive-graph-conf" || name == "adaptive-graph-corr") {
        d.alpha = alpha.value_or(0.2);
        d.tau = tau.value_or(1.0);
        d.lambda = lambda.value_or(d.alpha * d.tau);
    } else {
        d.alpha = alpha.value_or(0.2);
        d.tau = tau.value_or(0.8);
        d.lambda = lambda.value_or(d.alpha * d.tau);
    }
    return d;
}

inline std::unique_ptr<AdjustedWeights> renormalized_shifted_gamma() {
    return std::make_unique<RenormalizedWeights>(std::make_unique<ShiftedGammaWeights>());
}

inline std::unique_ptr<Engine> make_engine(const ProcedureSpec& spec) {
    const auto& d = spec.defaults;
    const std::string& n = spec.name;
    procedure_info(n);
    if (n == "spending-local") return std::make_unique<SpendingLocalEngine>(d);
    if (n == "graph-conf") return std::make_unique<GraphConfEngine>(d);
    if (n == "graph-conf-u") return std::make_unique<GraphConfUEngine>(d);
    if (n == "closed-spending") return std::make_unique<ClosedSpendingEngine>(d);
    if (n == "closed-graph") return std::make_unique<ClosedGraphEngine>(d);
    if (n == "adaptive-graph-conf")
        return std::make_unique<GraphConfEngine>(d, renormalized_shifted_gamma(), ConflictStructure::Form::Any,
                                                 "adaptive-graph-conf");
    if (n == "adaptive-graph-corr")
        return std::make_unique<AdaptiveGraphCorrEngine>(d, std::make_unique<EquicorrelatedGaussian>(spec.rho));
    return std::make_unique<FdrGraphEngine>(d, spec.w0.value_or(d.alpha), renormalized_shifted_gamma());
}

/// Runs the matching budget check on a finished engine.
inline ConditionReport check_condition(const Engine& e, ErrorCriterion c, double tol = default_condition_tol) {
    switch (c) {
    case ErrorCriterion::Fwer: return check_fwer_condition(e.ledger(), e.alpha(), tol);
    case ErrorCriterion::Fdr: return check_fdr_condition(e.ledger(), e.alpha(), tol);
    case ErrorCriterion::Corr: return check_corr_condition(e.ledger(), e.alpha(), std::max(tol, 1e-8));
    }
    return {};
}

} // namespace addis
