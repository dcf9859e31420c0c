#pragma once

// Brute-force verifiers. Slow by design; meant for tests and the verify
// subcommand, never for engine hot paths.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <vector>

#include "addis/core.hpp"
#include "addis/gamma.hpp"
#include "addis/weights.hpp"

namespace addis::oracles {

/// Dense weight matrix, w[j][i] for 1 <= j < i <= n (row/column 0 unused).
using Dense = std::vector<std::vector<double>>;

inline Dense dense(std::size_t n) { return Dense(n + 1, std::vector<double>(n + 1, 0.0)); }

inline void check_horizon(std::size_t n, std::size_t cap, const char* what) {
    if (n > cap) {
        std::ostringstream msg;
        msg << what << ": horizon " << n << " exceeds enumeration cap " << cap;
        throw Error(Errc::HorizonTooLarge, msg.str());
    }
}

/// g_{j,i} = (gamma_{t+i-j-1} - gamma_{t+i-j}) / gamma_t with t = 1 + sum_{k<j} (1 - U_k).
inline Dense telescoping_table(const GammaSpec& spec, const std::vector<int>& u, std::size_t n) {
    GammaTable g(spec);
    Dense w = dense(n);
    std::size_t t = 1;
    for (std::size_t j = 1; j <= n; ++j) {
        for (std::size_t i = j + 1; i <= n; ++i) w[j][i] = telescoping_weight(g, t, j, i);
        if (j <= u.size()) t += 1 - std::size_t(u[j - 1]);
    }
    return w;
}

// ---------------------------------------------------------------------------
// The blocked-mass rerouting procedure, transcribed step by step (with
// g^-_{j,i} subtracted in the else branch).
// ---------------------------------------------------------------------------

inline Dense rerouting_literal(const Dense& g, const std::vector<std::size_t>& lags, std::size_t n) {
    Dense gs = g, gm = dense(n);
    for (std::size_t j = 1; j <= n; ++j) {
        for (std::size_t i = j + 1; i <= n; ++i) {
            const std::size_t left = i - lags[i - 1];
            if (left <= j) {
                gm[j][i] = gs[j][i];
                gs[j][i] = 0.0;
            } else {
                double s = 0.0;
                for (std::size_t l = left; l < i; ++l) s += g[l][i] * gm[j][l];
                gm[j][i] = s;
                gs[j][i] -= gm[j][i];
            }
            for (std::size_t k = i + 1; k <= n; ++k) gs[j][k] += gm[j][i] * g[i][k];
        }
    }
    return gs;
}

// ---------------------------------------------------------------------------
// Improvement tables: the share of alpha gamma_j that reaches H_i under the
// local spending rule (g^{+,loc}) and under the adjusted graph (g^+).
// In the local pass the g^+ terms are read as g^{+,loc}.
// ---------------------------------------------------------------------------

struct ImprovementTables {
    Dense loc;
    Dense plus;
};

inline ImprovementTables improvement_weight_oracle(const GammaSpec& spec, const std::vector<std::size_t>& lags,
                                                   const std::vector<int>& u, std::size_t n,
                                                   std::size_t cap = 200) {
    check_horizon(n, cap, "improvement weight oracle");
    if (lags.size() < n || u.size() < n) throw Error(Errc::InvalidSpec, "lags/indicator feed shorter than horizon");
    validate_conflicts(ConflictStructure::from_lags(std::span(lags.data(), n)), true);
    const Dense g = telescoping_table(spec, u, n);
    auto U = [&](std::size_t k) { return double(u[k - 1]); };
    auto left = [&](std::size_t i) { return i - lags[i - 1]; };

    ImprovementTables out{dense(n), dense(n)};
    for (std::size_t j = 1; j <= n; ++j) {
        // local spending pass
        std::vector<double> gp(n + 1, 0.0), gm(n + 1, 0.0);
        for (std::size_t i = j + 1; i <= n; ++i) gp[i] = g[j][i];
        for (std::size_t i = j + 1; i <= n; ++i) {
            if (left(i) <= j) {
                gm[i] = gp[i];
                gp[i] = 0.0;
                for (std::size_t k = i + 1; k <= n; ++k) gp[k] += gm[i] * g[i][k] * U(i);
            } else {
                double s = 0.0;
                for (std::size_t l = left(i); l < i; ++l) s += g[l][i] * gm[l] * U(l);
                for (std::size_t l = left(i); l < i; ++l) s += g[l][i] * gp[l] * U(l);
                gm[i] = s;
                gp[i] -= gm[i];
                for (std::size_t k = i + 1; k <= n; ++k) gp[k] += gm[i] * g[i][k] * U(i) + gp[i] * g[i][k] * U(i);
            }
        }
        for (std::size_t i = j + 1; i <= n; ++i) out.loc[j][i] = gp[i];

        // adjusted graph pass; d_j is the first index whose window starts after j
        std::size_t d = j + 1;
        while (d <= n && left(d) <= j) ++d;
        std::fill(gp.begin(), gp.end(), 0.0);
        std::fill(gm.begin(), gm.end(), 0.0);
        for (std::size_t i = j + 1; i <= n; ++i) gp[i] = g[j][i];
        for (std::size_t i = j + 1; i <= n; ++i) {
            if (i < d) {
                gm[i] = gp[i];
                gp[i] = 0.0;
                for (std::size_t k = i + 1; k <= n; ++k) gp[k] += gm[i] * g[i][k];
            } else {
                double s = 0.0;
                for (std::size_t l = left(i); l < i; ++l) s += g[l][i] * gm[l];
                for (std::size_t l = left(i); l < i; ++l) s += g[l][i] * gp[l] * U(l);
                gm[i] = s;
                gp[i] -= gm[i];
                for (std::size_t k = i + 1; k <= n; ++k) gp[k] += gm[i] * g[i][k] + gp[i] * g[i][k] * U(i);
            }
        }
        for (std::size_t i = j + 1; i <= n; ++i) out.plus[j][i] = gp[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Budget function of the FWER proof:
//   F_n(U) = sum_j (alpha gamma_j + sum_{k<j} g_{k,j} U_k a_k) (1 - U_j),
//   a_k = alpha gamma_k + sum_{m<k} g_{m,k} U_m a_m.
// ---------------------------------------------------------------------------

struct BudgetFunction {
    double alpha = 0.2;
    std::vector<double> gamma;  // gamma_1..gamma_n
    Dense g;                    // g[k][j]
    std::size_t n() const { return gamma.size(); }
};

inline double budget_value(const BudgetFunction& bf, const std::vector<int>& u) {
    const std::size_t n = bf.n();
    std::vector<double> a(n + 1, 0.0);
    double f = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        double t = bf.alpha * bf.gamma[j - 1];
        for (std::size_t k = 1; k < j; ++k)
            if (u[k - 1]) t += bf.g[k][j] * a[k];
        a[j] = t;
        if (!u[j - 1]) f += t;
    }
    return f;
}

struct BudgetReport {
    double max_value = 0.0;
    std::vector<int> argmax;
    std::uint64_t patterns = 0;
    bool pass = true;
};

inline BudgetReport brute_force_budget_check(const BudgetFunction& bf, double tol = 1e-10, std::size_t cap = 20) {
    const std::size_t n = bf.n();
    check_horizon(n, cap, "budget enumeration");
    if (bf.g.size() < n + 1) throw Error(Errc::InvalidSpec, "weight matrix smaller than horizon");
    BudgetReport rep;
    rep.max_value = -1.0;
    std::vector<int> u(n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << n); ++mask) {
        for (std::size_t k = 0; k < n; ++k) u[k] = int((mask >> k) & 1u);
        const double f = budget_value(bf, u);
        if (f > rep.max_value) {
            rep.max_value = f;
            rep.argmax = u;
        }
        ++rep.patterns;
    }
    rep.pass = rep.max_value <= bf.alpha + tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Closure of the intersection tests
//   alpha_i^I = (tau_i - lambda_i) (alpha gamma_i
//               + sum_{j in I, j < i-L_i} g_{j,i} U_j alpha_j^I/(tau_j - lambda_j)
//               + sum_{j not in I, j < i} g_{j,i} alpha_j^{I+j}/(tau_j - lambda_j)).
// alpha_i^I only depends on I restricted to {1..i-1}.
// ---------------------------------------------------------------------------

struct ClosureProblem {
    double alpha = 0.2;
    std::vector<double> gamma;
    Dense g;
    std::vector<std::size_t> lags;
    std::vector<double> tau;
    std::vector<double> lambda;
    std::vector<double> p;
    std::size_t n() const { return p.size(); }
};

class ClosureOracle {
public:
    explicit ClosureOracle(ClosureProblem pr, std::size_t cap = 10) : pr_(std::move(pr)) {
        check_horizon(pr_.n(), std::min<std::size_t>(cap, 31), "closure oracle");
        if (pr_.gamma.size() < pr_.n() || pr_.lags.size() < pr_.n() || pr_.tau.size() < pr_.n() ||
            pr_.lambda.size() < pr_.n() || pr_.g.size() < pr_.n() + 1)
            throw Error(Errc::InvalidSpec, "closure problem arrays shorter than horizon");
        validate_conflicts(ConflictStructure::from_lags(std::span(pr_.lags.data(), pr_.n())), true);
    }

    /// alpha_i^I with I given as a bit mask over {1..i-1} (bit j-1 for index j).
    double level(std::size_t i, std::uint32_t mask) {
        mask &= (std::uint32_t(1) << (i - 1)) - 1u;
        const auto key = std::make_pair(i, mask);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const std::size_t left = i - pr_.lags[i - 1];
        double t = pr_.alpha * pr_.gamma[i - 1];
        for (std::size_t j = 1; j < i; ++j) {
            const std::uint32_t bit = std::uint32_t(1) << (j - 1);
            const double gap = pr_.tau[j - 1] - pr_.lambda[j - 1];
            if (mask & bit) {
                if (j < left) {
                    const auto ind = compute_indicators(pr_.p[j - 1], pr_.tau[j - 1], pr_.lambda[j - 1], 0.0);
                    t += pr_.g[j][i] * ind.U() * level(j, mask) / gap;
                }
            } else {
                t += pr_.g[j][i] * level(j, mask | bit) / gap;
            }
        }
        const double a = (pr_.tau[i - 1] - pr_.lambda[i - 1]) * t;
        memo_.emplace(key, a);
        return a;
    }

    /// alpha_i^{I_i} with I_i = {j < i : P_j > alpha_j^{I_j}} + {i}.
    std::vector<double> closed_levels() {
        std::vector<double> out;
        std::uint32_t accepted = 0;
        for (std::size_t i = 1; i <= pr_.n(); ++i) {
            const double a = level(i, accepted);
            out.push_back(a);
            if (pr_.p[i - 1] > a) accepted |= std::uint32_t(1) << (i - 1);
        }
        return out;
    }

    std::size_t evaluated() const { return memo_.size(); }

private:
    ClosureProblem pr_;
    std::map<std::pair<std::size_t, std::uint32_t>, double> memo_;
};

inline std::vector<double> closure_oracle(ClosureProblem pr, std::size_t cap = 10) {
    return ClosureOracle(std::move(pr), cap).closed_levels();
}

} // namespace addis::oracles
