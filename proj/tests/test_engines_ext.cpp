#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "addis/engines_ext.hpp"
#include "addis/engines_fwer.hpp"

using namespace addis;

namespace {

const double pi2 = std::numbers::pi * std::numbers::pi;
double basel(std::size_t i) { return 6.0 / (pi2 * double(i) * double(i)); }

std::vector<double> random_p(std::mt19937_64& rng, std::size_t n, double strong = 0.3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    for (auto& x : p) x = u(rng) < strong ? std::pow(u(rng), 5.0) * 0.05 : u(rng);
    return p;
}

std::vector<std::size_t> batch_set(std::size_t i, std::size_t b) {
    std::vector<std::size_t> s;
    for (std::size_t j = i - (i - 1) % b; j < i; ++j) s.push_back(j);
    return s;
}

/// Batches are tested together: all levels of a batch issued, then all of its p-values reported.
std::vector<double> feed_batches(Engine& e, std::size_t b, const std::vector<double>& p) {
    std::vector<double> levels;
    for (std::size_t start = 1; start <= p.size(); start += b) {
        const std::size_t end = std::min(p.size(), start + b - 1);
        for (std::size_t i = start; i <= end; ++i) {
            e.register_hypothesis({.conflicts = batch_set(i, b)});
            levels.push_back(e.level(i));
        }
        for (std::size_t i = start; i <= end; ++i) e.observe(i, p[i - 1]);
    }
    return levels;
}

std::vector<double> feed_plain(Engine& e, const std::vector<double>& p) {
    std::vector<double> levels;
    for (std::size_t i = 1; i <= p.size(); ++i) {
        levels.push_back(e.next());
        e.observe(i, p[i - 1]);
    }
    return levels;
}

double kronrod_pair(double rho, double a1, double a2) {
    const boost::math::normal n01;
    const double sr = std::sqrt(rho), s1 = std::sqrt(1.0 - rho);
    const double c1 = boost::math::quantile(boost::math::complement(n01, a1));
    const double c2 = boost::math::quantile(boost::math::complement(n01, a2));
    auto f = [&](double z) {
        return boost::math::pdf(n01, z) * boost::math::cdf(n01, (c1 - sr * z) / s1) *
               boost::math::cdf(boost::math::complement(n01, (c2 - sr * z) / s1));
    };
    const double inf = std::numeric_limits<double>::infinity();
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-14);
}

} // namespace

TEST(FdrGraph, FirstLevel) {
    FdrGraphEngine e;
    const double a = e.next();
    EXPECT_NEAR(a, 0.25 * 0.05 * basel(1), 1e-16);
    EXPECT_NEAR(a, 0.0075991, 5e-8);
    EXPECT_EQ(e.hat_level(1), a);
}

TEST(FdrGraph, InvalidW0) {
    auto g = [] { return std::make_unique<RenormalizedWeights>(std::make_unique<ShiftedGammaWeights>()); };
    for (double w0 : {0.0, -0.01, 0.06}) {
        try {
            FdrGraphEngine(fdr_defaults(), w0, g());
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InvalidW0);
        }
    }
    EXPECT_NO_THROW(FdrGraphEngine(fdr_defaults(), 0.05, g()));
}

TEST(FdrGraph, RejectionMemory) {
    FdrGraphEngine e;
    feed_plain(e, {0.9, 0.9, 0.0, 0.9});
    std::vector<bool> K;
    for (std::size_t j = 1; j <= 5; ++j) K.push_back(e.rejection_memory(j));
    EXPECT_EQ(K, (std::vector<bool>{false, false, false, true, true}));

    FdrGraphEngine none;
    feed_plain(none, {0.9, 0.6, 0.3, 0.9});
    for (std::size_t j = 1; j <= 5; ++j) EXPECT_FALSE(none.rejection_memory(j));

    FdrGraphEngine first;
    feed_plain(first, {0.0, 0.9, 0.9});
    for (std::size_t j = 2; j <= 4; ++j) EXPECT_TRUE(first.rejection_memory(j));
}

TEST(FdrGraph, FirstRejectionEarnsNothingWhenW0IsAlpha) {
    FdrGraphEngine e;
    feed_plain(e, {0.0});
    EXPECT_EQ(e.reward(1), 0.0);
    const double a2 = e.next();
    // rejected with P=0: U=1, so only the g* term carries
    EXPECT_NEAR(a2, 0.25 * (0.05 * basel(2) + basel(1) * e.hat_level(1) / 0.25), 1e-16);
}

TEST(FdrGraph, TwoRejectionsHandRecursion) {
    const double a = 0.05, w0 = 0.025;
    FdrGraphEngine e(fdr_defaults(), w0, std::make_unique<UniformNextFreeWeights>(2),
                     std::make_unique<UniformNextFreeWeights>(2));
    feed_plain(e, {0.0, 0.0});
    const double h1 = 0.25 * w0 * basel(1);
    const double h2 = 0.25 * (w0 * basel(2) + 0.5 * h1 / 0.25 + 0.5 * (a - w0));
    const double h3 = 0.25 * (w0 * basel(3) + 0.5 * h1 / 0.25 + 0.5 * h2 / 0.25 + 0.5 * (a - w0) + 0.5 * a);
    EXPECT_NEAR(e.hat_level(1), h1, 1e-16);
    EXPECT_NEAR(e.hat_level(2), h2, 1e-16);
    e.next();
    EXPECT_NEAR(e.hat_level(3), h3, 1e-16);
}

TEST(FdrGraph, ClipsAtLambda) {
    FdrGraphEngine e(EngineDefaults{.alpha = 0.05, .tau = 0.5, .lambda = 0.001});
    const double a = e.next();
    EXPECT_EQ(a, 0.001);
    EXPECT_GT(e.hat_level(1), 0.001);
}

TEST(FdrGraph, TrajectoriesSatisfyConditionAndRewardAccounting) {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 200;
        std::vector<std::size_t> E(n);
        const std::size_t delay = rng() % 6;
        for (std::size_t j = 1; j <= n; ++j) E[j - 1] = j + delay;
        auto cs = ConflictStructure::from_finish_times(E);
        const double w0 = rep % 2 ? 0.05 : 0.02;
        FdrGraphEngine e(fdr_defaults(), w0,
                         std::make_unique<RenormalizedWeights>(std::make_unique<ShiftedGammaWeights>()));
        auto p = random_p(rng, n);
        for (std::size_t t = 1; t <= n + delay; ++t) {
            if (t <= n) {
                e.register_hypothesis({.conflicts = cs.set(t)});
                e.level(t);
            }
            if (t > delay) e.observe(t - delay, p[t - delay - 1]);
        }
        EXPECT_TRUE(check_fdr_condition(e.ledger(), 0.05).pass);

        RenormalizedWeights h(std::make_unique<ShiftedGammaWeights>());
        const auto& hist = e.history();
        double total = 0.0;
        std::size_t rejections = 0;
        for (std::size_t j = 1; j <= n; ++j) {
            total += w0 * hist.gamma(j);
            for (std::size_t k = 1; k < j; ++k)
                if (!cs.conflicts(k, j) && hist.require(k).R) total += h(hist, k, j) * e.reward(k);
            rejections += hist.require(j).R;
            EXPECT_LE(total, 0.05 * double(std::max<std::size_t>(rejections, 1)) + 1e-12) << "j=" << j;
        }
    }
}

TEST(FdrGraph, ExtraRejectionNeverLowersLaterLevels) {
    std::mt19937_64 rng(18);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 60;
        auto p = random_p(rng, n);
        const std::size_t j = 1 + rng() % (n - 1);
        if (p[j - 1] == 0.0) continue;
        auto q = p;
        q[j - 1] = 0.0;
        FdrGraphEngine a, b;
        feed_plain(a, p);
        feed_plain(b, q);
        for (std::size_t i = j + 1; i <= n; ++i) EXPECT_GE(b.hat_level(i), a.hat_level(i) - 1e-18) << "i=" << i;
    }
}

TEST(AdaptiveCorr, SingletonBatchesEqualGraphConf) {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 10; ++rep) {
        auto p = random_p(rng, 50);
        AdaptiveGraphCorrEngine c(corr_defaults(), std::make_unique<EquicorrelatedGaussian>(0.5));
        GraphConfEngine g(corr_defaults());
        auto lc = feed_batches(c, 1, p);
        auto lg = feed_batches(g, 1, p);
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(lc[i], lg[i], 1e-16);
        c.finalize();
        for (std::size_t i = 1; i <= p.size(); ++i) EXPECT_EQ(*c.alpha_c(i), lc[i - 1]);
    }
}

TEST(AdaptiveCorr, SingleBatchWithoutCandidatesDoesNotAdapt) {
    AdaptiveGraphCorrEngine c(EngineDefaults{.alpha = 0.2, .tau = 1.0, .lambda = 0.0},
                              std::make_unique<EquicorrelatedGaussian>(0.5));
    std::mt19937_64 rng(1);
    auto l = feed_batches(c, 20, random_p(rng, 20));
    for (std::size_t i = 1; i <= 20; ++i) EXPECT_NEAR(l[i - 1], 0.2 * basel(i), 1e-16);
}

TEST(AdaptiveCorr, BatchOfTwoHandRecursion) {
    const double rho = 0.5;
    AdaptiveGraphCorrEngine c(corr_defaults(), std::make_unique<EquicorrelatedGaussian>(rho));
    c.register_hypothesis({});
    c.register_hypothesis({.conflicts = {1}});
    const double a1 = c.level(1), a2 = c.level(2);
    EXPECT_NEAR(a1, 0.8 * 0.2 * basel(1), 1e-16);
    EXPECT_NEAR(a2, 0.8 * 0.2 * basel(2), 1e-16);
    c.observe(1, 0.5);
    c.observe(2, 0.5);
    c.register_hypothesis({});
    const double a3 = c.level(3);
    const double ac2 = kronrod_pair(rho, a1, a2);
    EXPECT_NEAR(*c.alpha_c(2), ac2, 1e-10);
    EXPECT_EQ(*c.alpha_c(1), a1);
    // g*_{1,3} carries a1 - a1^c = 0; g*_{2,3} = gamma_1
    EXPECT_NEAR(a3, 0.8 * 0.2 * basel(3) + basel(1) * (a2 - ac2), 1e-10);
    GraphConfEngine g(corr_defaults());
    g.register_hypothesis({});
    g.register_hypothesis({.conflicts = {1}});
    g.level(1);
    g.level(2);
    g.observe(1, 0.5);
    g.observe(2, 0.5);
    EXPECT_GT(a3, g.next());
}

TEST(AdaptiveCorr, DominatesConfAndPassesCondition) {
    std::mt19937_64 rng(20);
    for (int rep = 0; rep < 12; ++rep) {
        const std::size_t b = std::vector<std::size_t>{1, 5, 10, 20}[rep % 4];
        const double rho = std::vector<double>{0.3, 0.5, 0.7, 0.9}[rep % 4];
        auto p = random_p(rng, 100);
        AdaptiveGraphCorrEngine c(corr_defaults(), std::make_unique<EquicorrelatedGaussian>(rho));
        GraphConfEngine g(corr_defaults());
        auto lc = feed_batches(c, b, p);
        auto lg = feed_batches(g, b, p);
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_GE(lc[i], lg[i] - 1e-16);
        c.finalize();
        auto rep_ = check_corr_condition(c.ledger(), 0.2, 1e-8);
        EXPECT_TRUE(rep_.pass) << rep_.worst_excess;
        for (std::size_t i = 1; i <= p.size(); ++i) {
            EXPECT_LE(*c.alpha_c(i), lc[i - 1]);
            EXPECT_GE(*c.alpha_c(i), 0.0);
        }
    }
}

TEST(AdaptiveCorr, Errors) {
    AdaptiveGraphCorrEngine c(corr_defaults(), std::make_unique<EquicorrelatedGaussian>(0.5));
    c.register_hypothesis({});
    c.register_hypothesis({.conflicts = {1}});
    c.level(1);
    c.level(2);
    c.observe(1, 0.3);
    c.register_hypothesis({});
    try {
        c.level(3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BatchIncomplete);
    }
    c.observe(2, 0.3);
    EXPECT_NO_THROW(c.level(3));
    EXPECT_THROW(c.register_hypothesis({.tau = 0.8}), Error);
    EXPECT_THROW(c.register_hypothesis({.conflicts = {2}}), Error);  // not a batch
    EXPECT_THROW(AdaptiveGraphCorrEngine(fdr_defaults(), std::make_unique<EquicorrelatedGaussian>(0.5)), Error);
    try {
        check_corr_condition(GraphConfEngine(corr_defaults()).ledger(), 0.2);
    } catch (...) {
        FAIL();
    }
}
