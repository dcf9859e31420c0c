#pragma once

// Oracle suites behind `addis verify` and the acceptance run. Each suite
// returns one line per check and an overall verdict.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "addis/alpha_c.hpp"
#include "addis/engines_fwer.hpp"
#include "addis/oracles.hpp"

namespace addis::verify {

struct SuiteResult {
    std::string suite;
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

namespace detail {

inline std::vector<double> gamma_values(const GammaSpec& spec, std::size_t n) {
    GammaTable t(spec);
    std::vector<double> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(t(i));
    return out;
}

// nonnegative rows with total at most one, roughly a third of entries zero
inline oracles::Dense random_table(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto g = oracles::dense(n);
    for (std::size_t j = 1; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = j + 1; i <= n; ++i) s += (g[j][i] = unif(rng) < 0.3 ? 0.0 : unif(rng));
        const double keep = unif(rng);
        if (s > 0)
            for (std::size_t i = j + 1; i <= n; ++i) g[j][i] *= keep / s;
    }
    return g;
}

inline std::vector<std::size_t> random_lags(std::mt19937_64& rng, std::size_t n, std::size_t max_lag) {
    std::vector<std::size_t> lags(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t cap = i == 1 ? 0 : std::min({i - 1, lags[i - 2] + 1, max_lag});
        lags[i - 1] = rng() % (cap + 1);
    }
    return lags;
}

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

} // namespace detail

/// Exhaustive budget check over all 2^n patterns of U.
inline SuiteResult budget_suite(std::size_t n = 12, std::size_t tables = 10, std::uint64_t seed = 1,
                                double alpha = 0.2) {
    SuiteResult r{"budget", true, {}};
    std::mt19937_64 rng(seed);
    for (const auto& spec : {GammaSpec::logq(), GammaSpec::power(1.6), GammaSpec::basel()}) {
        double worst = -1.0;
        for (std::size_t t = 0; t < tables; ++t) {
            oracles::BudgetFunction bf{alpha, detail::gamma_values(spec, n), detail::random_table(rng, n)};
            worst = std::max(worst, oracles::brute_force_budget_check(bf, 1e-10).max_value);
        }
        r.check(worst <= alpha + 1e-10, spec.id() + ": max F_n over " + std::to_string(tables) + " tables x 2^" +
                                            std::to_string(n) + " patterns = " + detail::fmt(worst));
    }
    return r;
}

/// Closure-principle levels against the closed graph engine, lag one everywhere.
inline SuiteResult closure_suite(std::size_t n = 8, std::size_t seeds = 50, std::uint64_t seed = 1,
                                 double tol = 1e-10) {
    SuiteResult r{"closure", true, {}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        const auto g = detail::random_table(rng, n);
        std::vector<double> p(n);
        for (auto& x : p) x = unif(rng) < 0.4 ? 0.05 * unif(rng) : unif(rng);
        std::vector<std::size_t> lags(n, 1);
        lags[0] = 0;
        EngineDefaults d;
        oracles::ClosureProblem pr{d.alpha, detail::gamma_values(d.gamma, n), g, lags,
                                   std::vector<double>(n, d.tau), std::vector<double>(n, d.lambda), p};
        const auto oracle = oracles::closure_oracle(pr);
        TableWeights::Rows rows;
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t i = j + 1; i <= n; ++i)
                if (g[j][i] != 0.0) rows[j][i] = g[j][i];
        ClosedGraphEngine e(d, std::make_unique<TableWeights>(rows));
        for (std::size_t i = 1; i <= n; ++i) {
            HypothesisSpec hs;
            if (i > 1) hs.conflicts = {i - 1};
            worst = std::max(worst, std::fabs(e.next(hs) - oracle[i - 1]));
            e.observe(i, p[i - 1]);
        }
    }
    r.check(worst <= tol, std::to_string(seeds) + " trajectories at n=" + std::to_string(n) +
                              ": max |closed - closure| = " + detail::fmt(worst));
    return r;
}

/// Local-spending shares never exceed the adjusted-graph shares.
inline SuiteResult improvement_suite(std::size_t n = 50, std::size_t instances = 20, std::uint64_t seed = 1) {
    SuiteResult r{"improvement", true, {}};
    std::mt19937_64 rng(seed);
    double worst = -1.0;
    for (std::size_t k = 0; k < instances; ++k) {
        const auto lags = detail::random_lags(rng, n, 10);
        std::vector<int> u(n);
        for (auto& x : u) x = int(rng() % 2);
        const auto t = oracles::improvement_weight_oracle(GammaSpec::basel(), lags, u, n);
        for (std::size_t j = 1; j < n; ++j)
            for (std::size_t i = j + 1; i <= n; ++i) worst = std::max(worst, t.loc[j][i] - t.plus[j][i]);
    }
    r.check(worst <= 1e-14, std::to_string(instances) + " instances at n=" + std::to_string(n) +
                                ": max (g_loc - g_plus) = " + detail::fmt(worst));
    return r;
}

/// Quadrature alpha^c against direct simulation of the equicorrelated model.
inline SuiteResult alpha_c_suite(std::uint64_t samples = 1000000, std::uint64_t seed = 1) {
    SuiteResult r{"alpha-c", true, {}};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    for (double rho : {0.3, 0.5, 0.9}) {
        for (double a : {0.01, 0.05, 0.1}) {
            // two earlier hypotheses in the batch at level a, the current one at 2a
            const EquicorrelatedGaussian model(rho);
            const double aj = 2 * a;
            const double q = model.alpha_c({{0, a}, {1, a}}, 2, aj).value;
            const double c = normal_upper_quantile(a), cj = normal_upper_quantile(aj);
            const double sr = std::sqrt(rho), s1 = std::sqrt(1.0 - rho);
            std::uint64_t hits = 0;
            for (std::uint64_t k = 0; k < samples; ++k) {
                const double z0 = sr * z(rng);
                const double x1 = z0 + s1 * z(rng), x2 = z0 + s1 * z(rng), x3 = z0 + s1 * z(rng);
                hits += (x1 < c && x2 < c && x3 >= cj);
            }
            const double mc = double(hits) / double(samples);
            const double se = std::sqrt(mc * (1 - mc) / double(samples));
            std::ostringstream what;
            what << "rho=" << rho << " a=" << a << ": quadrature " << detail::fmt(q) << ", simulation "
                 << detail::fmt(mc) << " +- " << detail::fmt(se);
            r.check(std::fabs(q - mc) <= 3 * se && q <= aj, what.str());
        }
    }
    const EquicorrelatedGaussian indep(0.0);
    const double prod = indep.alpha_c({{0, 0.03}, {1, 0.07}}, 2, 0.05).value;
    r.check(std::fabs(prod - 0.05 * 0.97 * 0.93) <= 1e-10, "rho=0 product formula: " + detail::fmt(prod));
    // the quadrature path itself, with the common factor switched off in effect
    const double near = EquicorrelatedGaussian(1e-14).alpha_c({{0, 0.03}, {1, 0.07}}, 2, 0.05).value;
    r.check(std::fabs(near - 0.05 * 0.97 * 0.93) <= 1e-10, "quadrature at rho=1e-14: " + detail::fmt(near));
    return r;
}

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> s{"budget", "closure", "improvement", "alpha-c"};
    return s;
}

} // namespace addis::verify
