#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "addis/engines_fwer.hpp"

using namespace addis;

namespace {

const double pi2 = std::numbers::pi * std::numbers::pi;
double basel(std::size_t i) { return 6.0 / (pi2 * double(i) * double(i)); }

std::vector<std::vector<std::size_t>> sets_from_lags(const std::vector<std::size_t>& lags) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 1; i <= lags.size(); ++i) {
        std::vector<std::size_t> s;
        for (std::size_t j = i - lags[i - 1]; j < i; ++j) s.push_back(j);
        out.push_back(s);
    }
    return out;
}

std::vector<std::size_t> random_lags(std::mt19937_64& rng, std::size_t n, std::size_t max_lag) {
    std::vector<std::size_t> lags(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const std::size_t cap = i == 1 ? 0 : std::min({i - 1, lags[i - 2] + 1, max_lag});
        lags[i - 1] = rng() % (cap + 1);
    }
    return lags;
}

std::vector<std::size_t> batch_lags(std::size_t n, std::size_t b) {
    std::vector<std::size_t> lags(n);
    for (std::size_t i = 1; i <= n; ++i) lags[i - 1] = (i - 1) % b;
    return lags;
}

// p-values spread over rejections, candidates, middling and discarded outcomes
std::vector<double> random_p(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    for (auto& x : p) {
        const double r = u(rng);
        x = r < 0.25 ? std::pow(u(rng), 4.0) * 0.05 : u(rng);
    }
    return p;
}

/// Registers, levels and observes each hypothesis in index order.
std::vector<double> feed(Engine& e, const std::vector<std::vector<std::size_t>>& sets, const std::vector<double>& p) {
    std::vector<double> levels;
    for (std::size_t i = 1; i <= p.size(); ++i) {
        e.register_hypothesis({.conflicts = sets[i - 1]});
        levels.push_back(e.level(i));
        e.observe(i, p[i - 1]);
    }
    return levels;
}

/// Asynchronous feed: H_j finishes at time E_j; levels issued at entry, p-values
/// reported at exit, reports finishing at the same time in the given order.
std::vector<double> feed_async(Engine& e, const std::vector<std::size_t>& finish, const std::vector<double>& p,
                               bool reverse_ties) {
    const std::size_t n = p.size();
    auto cs = ConflictStructure::from_finish_times(finish);
    std::vector<double> levels;
    for (std::size_t t = 1; t <= n + *std::max_element(finish.begin(), finish.end()); ++t) {
        if (t <= n) {
            e.register_hypothesis({.conflicts = cs.set(t)});
            levels.push_back(e.level(t));
        }
        std::vector<std::size_t> done;
        for (std::size_t j = 1; j <= std::min(t, n); ++j)
            if (finish[j - 1] == t) done.push_back(j);
        if (reverse_ties) std::reverse(done.begin(), done.end());
        for (auto j : done) e.observe(j, p[j - 1]);
    }
    return levels;
}

} // namespace

TEST(SpendingLocal, Examples) {
    SpendingLocalEngine e;
    EXPECT_NEAR(e.next(), 0.2 * 0.64 * basel(1), 1e-15);
    EXPECT_NEAR(e.level(1), 0.0778147, 5e-8);
    e.observe(1, 0.5);  // S=1, C=0
    EXPECT_NEAR(e.next({.conflicts = {1}}), 0.128 * basel(2), 1e-15);
    EXPECT_NEAR(e.level(2), 0.0194537, 5e-8);
    e.observe(2, 0.1);  // S=1, C=1
    EXPECT_EQ(e.counter(2), 2u);
    e.register_hypothesis({});
    EXPECT_EQ(e.counter(3), 2u);
    EXPECT_NEAR(e.level(3), 0.128 * basel(2), 1e-15);
}

TEST(SpendingLocal, MissingIndicatorAndGapForms) {
    SpendingLocalEngine e;
    e.next();
    e.register_hypothesis({});
    try {
        e.level(2);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::MissingIndicator);
    }
    SpendingLocalEngine f;
    f.next();
    f.observe(1, 0.5);
    f.next();
    f.observe(2, 0.5);
    EXPECT_THROW(f.register_hypothesis({.conflicts = {1}}), Error);  // {1} is not a suffix of {1,2}
}

TEST(GraphConf, Examples) {
    GraphConfEngine e;
    EXPECT_NEAR(e.next(), 0.0778147, 5e-8);
    e.observe(1, 0.9);  // discarded, U=1
    const double a2 = e.next();
    EXPECT_NEAR(a2, 0.64 * (0.2 * basel(2) + basel(1) * 0.2 * basel(1)), 1e-15);
}

TEST(GraphConf, ReroutedEdgeAroundConflict) {
    const double g12 = basel(1), g13 = basel(2), g23 = basel(1);
    auto make = [&] {
        return std::make_unique<ExplicitAdjustedWeights>(
            TableWeights::Rows{{1, {{3, g13 + g12}}}, {2, {{3, g23}}}});
    };
    for (double p1 : {0.001, 0.5, 0.95}) {
        GraphConfEngine e({}, make());
        e.next();
        e.register_hypothesis({.conflicts = {1}});
        const double a2 = e.level(2);
        EXPECT_NEAR(a2, 0.64 * 0.2 * basel(2), 1e-15);
        e.observe(1, p1);
        e.observe(2, 0.95);
        const double u1 = e.indicators(1)->U();
        const double a3 = e.next();
        const double expect = 0.64 * (0.2 * basel(3) + (g13 + g12) * u1 * e.level(1) / 0.64 + g23 * a2 / 0.64);
        EXPECT_NEAR(a3, expect, 1e-15);
    }
    GraphConfEngine bad({}, std::make_unique<ExplicitAdjustedWeights>(TableWeights::Rows{{1, {{2, 0.5}}}}));
    bad.next();
    bad.observe(1, 0.9);
    bad.register_hypothesis({.conflicts = {1}});
    try {
        bad.level(2);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::ScheduleViolation);
    }
}

TEST(GraphConfU, ZeroLagsEqualSpending) {
    std::mt19937_64 rng(5);
    for (auto spec : {GammaSpec::basel(), GammaSpec::logq(), GammaSpec::power(1.6)}) {
        for (int rep = 0; rep < 30; ++rep) {
            const std::size_t n = 80;
            auto sets = sets_from_lags(std::vector<std::size_t>(n, 0));
            auto p = random_p(rng, n);
            EngineDefaults d{.gamma = spec};
            SpendingLocalEngine s(d);
            GraphConfUEngine g(d);
            auto ls = feed(s, sets, p);
            auto lg = feed(g, sets, p);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(lg[i], ls[i], 1e-12 * ls[i]) << spec.id() << " i=" << i + 1;
        }
    }
}

TEST(GraphConfU, WorkedCaseWithOneLag) {
    for (double p1 : {0.01, 0.5, 0.9}) {
        for (double p2 : {0.01, 0.5, 0.9}) {
            GraphConfUEngine e;
            SpendingLocalEngine s;
            auto sets = sets_from_lags({0, 1, 0});
            auto la = feed(e, sets, {p1, p2, 0.5});
            auto ls = feed(s, sets, {p1, p2, 0.5});
            GammaTable g(GammaSpec::basel());
            auto ind1 = compute_indicators(p1, 0.8, 0.16, la[0]);
            auto ind2 = compute_indicators(p2, 0.8, 0.16, la[1]);
            const std::size_t t1 = 1, t2 = 1 + ind1.spent();
            const double g12 = telescoping_weight(g, t1, 1, 2), g13 = telescoping_weight(g, t1, 1, 3);
            const double g23 = telescoping_weight(g, t2, 2, 3);
            const double a = 0.2;
            const double expect =
                0.64 * (a * g(3) + ind1.U() * a * g(1) * (g13 + g12 * g23) + ind2.U() * a * g(2) * g23);
            EXPECT_NEAR(la[2], expect, 1e-15);
            EXPECT_GE(la[2], ls[2] - 1e-15);
        }
    }
}

TEST(GraphConfU, DominatesSpendingOnLagTrajectories) {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 100;
        auto lags = rep % 2 ? batch_lags(n, 5) : random_lags(rng, n, 8);
        auto sets = sets_from_lags(lags);
        auto p = random_p(rng, n);
        SpendingLocalEngine s;
        GraphConfUEngine g;
        auto ls = feed(s, sets, p);
        auto lg = feed(g, sets, p);
        for (std::size_t i = 0; i < n; ++i) EXPECT_GE(lg[i], ls[i] - 1e-12) << "i=" << i + 1;
    }
}

TEST(ClosedSpending, Examples) {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 60;
        auto sets = sets_from_lags(std::vector<std::size_t>(n, 0));
        auto p = random_p(rng, n);
        SpendingLocalEngine s;
        ClosedSpendingEngine c;
        auto ls = feed(s, sets, p);
        auto lc = feed(c, sets, p);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(lc[i], ls[i]);
    }
    ClosedSpendingEngine c;
    SpendingLocalEngine s;
    c.next();
    s.next();
    c.observe(1, 0.0);
    s.observe(1, 0.0);
    c.register_hypothesis({.conflicts = {1}});
    s.register_hypothesis({.conflicts = {1}});
    EXPECT_EQ(c.counter(2), 1u);
    EXPECT_EQ(s.counter(2), 2u);
    EXPECT_GT(c.level(2), s.level(2));
}

TEST(ClosedSpending, DominatesSpending) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 100;
        auto sets = sets_from_lags(rep % 2 ? batch_lags(n, 10) : random_lags(rng, n, 6));
        auto p = random_p(rng, n);
        SpendingLocalEngine s;
        ClosedSpendingEngine c;
        feed(s, sets, p);
        feed(c, sets, p);
        for (std::size_t i = 1; i <= n; ++i) {
            EXPECT_LE(c.counter(i), s.counter(i));
            EXPECT_GE(c.level(i), s.level(i));
        }
    }
}

TEST(ClosedGraph, ReducesToGraphConfWhenConflictingWeightsVanish) {
    std::mt19937_64 rng(9);
    const std::size_t n = 40;
    TableWeights::Rows rows;
    for (std::size_t j = 1; j < n; ++j) rows[j] = {{j + 2, 0.5}, {j + 3, 0.5}};
    for (int rep = 0; rep < 20; ++rep) {
        auto sets = sets_from_lags(batch_lags(n, 2));
        for (std::size_t i = 2; i <= n; ++i) sets[i - 1] = {i - 1};
        auto p = random_p(rng, n);
        ClosedGraphEngine c({}, std::make_unique<TableWeights>(rows));
        GraphConfEngine g({}, std::make_unique<ExplicitAdjustedWeights>(rows));
        auto lc = feed(c, sets, p);
        auto lg = feed(g, sets, p);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(lc[i], lg[i], 1e-15 + 1e-13 * lg[i]);
    }
}

TEST(ClosedGraph, OnlineGraphicalLimit) {
    EngineDefaults d{.alpha = 0.2, .tau = 1.0, .lambda = 0.0};
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 30;
        auto p = random_p(rng, n);
        ClosedGraphEngine c(d);
        auto lc = feed(c, sets_from_lags(std::vector<std::size_t>(n, 0)), p);
        std::vector<double> a(n);
        for (std::size_t i = 1; i <= n; ++i) {
            double t = 0.2 * basel(i);
            for (std::size_t j = 1; j < i; ++j) t += basel(i - j) * (p[j - 1] <= a[j - 1] ? 1.0 : 0.0) * a[j - 1];
            a[i - 1] = t;
            EXPECT_NEAR(lc[i - 1], t, 1e-15);
        }
    }
}

TEST(ClosedGraph, RejectionInsideLagCarries) {
    TableWeights::Rows rows{{1, {{2, 0.5}, {3, 0.5}}}, {2, {{3, 0.5}, {4, 0.5}}}};
    ClosedGraphEngine c({}, std::make_unique<TableWeights>(rows));
    const double a1 = c.next();
    c.observe(1, 0.0);
    const double a2 = c.next({.conflicts = {1}});
    EXPECT_NEAR(a2, 0.64 * (0.2 * basel(2) + 0.5 * a1 / 0.64), 1e-15);
    ClosedGraphEngine d({}, std::make_unique<TableWeights>(rows));
    d.next();
    d.observe(1, 0.5);
    EXPECT_NEAR(d.next({.conflicts = {1}}), 0.64 * 0.2 * basel(2), 1e-15);
}

TEST(ClosedGraph, FrozenRows) {
    ClosedGraphEngine c;
    c.register_hypothesis({});
    c.register_hypothesis({.conflicts = {1}});
    EXPECT_NO_THROW(c.set_base_row(1, {{2, 0.3}, {3, 0.7}}));
    c.level(1);
    try {
        c.set_base_row(1, {{2, 0.9}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::FrozenRowViolation);
    }
    EXPECT_NO_THROW(c.set_base_row(2, {{3, 1.0}}));
}

TEST(Observe, Decisions) {
    GraphConfEngine e(EngineDefaults{.alpha = 0.2, .tau = 0.8, .lambda = 0.16, .gamma = GammaSpec::custom({0.390625})});
    const double a1 = e.next();
    EXPECT_NEAR(a1, 0.05, 1e-15);
    auto d = e.observe(1, 0.04);
    EXPECT_TRUE(d.reject());
    e.next();
    auto d2 = e.observe(2, 0.5);
    EXPECT_FALSE(d2.reject());
    EXPECT_TRUE(d2.indicators.S);
    EXPECT_FALSE(d2.indicators.C);
    EXPECT_EQ(d2.indicators.U(), 0);
    try {
        e.observe(2, 0.1);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::DuplicateObservation);
    }
    try {
        e.observe(7, 0.1);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::UnknownIndex);
    }
    try {
        e.level(5);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::UnknownIndex);
    }
}

TEST(Observe, OutOfOrderFeedMatchesInOrder) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 40;
        std::vector<std::size_t> E(n);
        for (std::size_t j = 1; j <= n; ++j) E[j - 1] = j + rng() % 4;
        auto p = random_p(rng, n);
        GraphConfEngine a, b;
        auto la = feed_async(a, E, p, false);
        auto lb = feed_async(b, E, p, true);
        EXPECT_EQ(la, lb);
        auto A = a.ledger(), B = b.ledger();
        for (std::size_t i = 1; i <= n; ++i) EXPECT_EQ(A.at(i).indicators, B.at(i).indicators);
    }
}

TEST(Engines, ConflictingPValuesDoNotMoveLevels) {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 50;
        auto lags = random_lags(rng, n, 5);
        auto sets = sets_from_lags(lags);
        auto p = random_p(rng, n);
        const std::size_t i = 10 + rng() % 40;
        if (lags[i - 1] == 0) continue;
        const std::size_t j = i - 1 - rng() % lags[i - 1];
        auto q = p;
        q[j - 1] = p[j - 1] < 0.5 ? 0.95 : 0.001;
        auto check = [&](auto make) {
            auto e1 = make();
            auto e2 = make();
            auto l1 = feed(*e1, sets, p);
            auto l2 = feed(*e2, sets, q);
            for (std::size_t k = j + 1; k <= i; ++k) EXPECT_EQ(l1[k - 1], l2[k - 1]) << e1->procedure() << " k=" << k;
        };
        check([] { return std::make_unique<SpendingLocalEngine>(); });
        check([] { return std::make_unique<GraphConfEngine>(); });
        check([] { return std::make_unique<GraphConfUEngine>(); });
    }
}

TEST(Engines, EveryTrajectorySatisfiesTheBudgetCondition) {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 100;
        auto sets = sets_from_lags(rep % 2 ? batch_lags(n, 1 + rng() % 20) : random_lags(rng, n, 10));
        auto p = random_p(rng, n);
        std::vector<std::unique_ptr<Engine>> engines;
        const auto gamma = std::vector{GammaSpec::basel(), GammaSpec::logq(), GammaSpec::power(1.6)}[rep % 3];
        EngineDefaults d{.gamma = gamma};
        engines.push_back(std::make_unique<SpendingLocalEngine>(d));
        engines.push_back(std::make_unique<GraphConfEngine>(d));
        engines.push_back(std::make_unique<GraphConfUEngine>(d));
        engines.push_back(std::make_unique<ClosedSpendingEngine>(d));
        engines.push_back(std::make_unique<ClosedGraphEngine>(d));
        for (auto& e : engines) {
            feed(*e, sets, p);
            auto rep_ = check_fwer_condition(e->ledger(), 0.2);
            EXPECT_TRUE(rep_.pass) << e->procedure() << " excess " << rep_.worst_excess;
        }
    }
}

TEST(Engines, RemainingLevelAccounting) {
    // nothing tested: the whole budget remains
    GraphConfEngine g;
    EXPECT_NEAR(g.remaining_level(), 0.2, 1e-12);
    SpendingLocalEngine s;
    EXPECT_NEAR(s.remaining_level(), 0.2, 1e-12);
    // with all row masses equal to one, future level plus spend is the full budget
    std::mt19937_64 rng(14);
    auto p = random_p(rng, 12);
    GraphConfEngine e(EngineDefaults{.alpha = 0.05, .tau = 0.8, .lambda = 0.3, .gamma = GammaSpec::geometric(0.6)});
    feed(e, sets_from_lags(std::vector<std::size_t>(12, 0)), p);
    EXPECT_NEAR(e.remaining_level() + e.ledger().prefix_spend().back(), 0.05, 1e-12);
}

TEST(Engines, ConfigurationErrors) {
    EXPECT_THROW(GraphConfEngine(EngineDefaults{.alpha = 1.2}), Error);
    EXPECT_THROW(GraphConfEngine(EngineDefaults{.tau = 0.5, .lambda = 0.5}), Error);
    GraphConfEngine e;
    EXPECT_THROW(e.register_hypothesis({.tau = 0.3, .lambda = 0.3 - 1e-9}), Error);
    EXPECT_THROW(e.register_hypothesis({.conflicts = {1}}), Error);
    EXPECT_EQ(e.registered(), 0u);
}

TEST(Engines, WarnsWhenLevelExceedsLambda) {
    GraphConfEngine e(EngineDefaults{.alpha = 0.9, .tau = 0.95, .lambda = 0.01});
    e.next();
    EXPECT_EQ(e.warnings().size(), 1u);
}
