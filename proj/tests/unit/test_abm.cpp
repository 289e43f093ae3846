#include <gtest/gtest.h>

#include <cmath>

#include "synthetic.hpp"
#include "wikitox/abm.hpp"
#include "wikitox/stats.hpp"

using namespace wikitox;
using namespace wikitox::testing;

namespace {

Scenario custom(std::function<std::uint64_t(int)> arrivals, int horizon, double lambda) {
    Scenario s;
    s.id = 9;
    s.name = "custom";
    s.arrivals = std::move(arrivals);
    s.horizon = horizon;
    s.lambda = lambda;
    return s;
}

}  // namespace

TEST(Lambda, ConstantGaps) {
    std::vector<ContributionLog> logs{periodic_log("A", 20, [](int d) { return d % 2 == 0; }),
                                      periodic_log("B", 9, [](int d) { return d % 2 == 0; })};
    EXPECT_DOUBLE_EQ(estimate_lambda(logs), 0.5);
}

TEST(Lambda, MonteCarlo) {
    Rng rng = make_rng(1, "lambda");
    std::vector<Instant> ts;
    double t = 0.0;
    for (int i = 0; i <= 100000; ++i) {
        ts.push_back(kEpoch + Seconds{static_cast<std::int64_t>(std::llround(t * kDay))});
        t += -std::log1p(-uniform01(rng)) / 0.7;
    }
    std::vector<ContributionLog> logs{ContributionLog::make("U", ts)};
    double est = estimate_lambda(logs);
    EXPECT_GE(est, 0.69);
    EXPECT_LE(est, 0.71);
}

TEST(Lambda, NoGaps) {
    std::vector<ContributionLog> logs{ContributionLog::make("U", {kEpoch})};
    EXPECT_THROW(estimate_lambda(logs), SimulationError);
    EXPECT_THROW(estimate_lambda({}), SimulationError);
}

TEST(Curve, Constructors) {
    auto pl = EnvironmentCurve::power_law(0.47, 0.95);
    EXPECT_NEAR(pl(1), 0.47, 1e-12);
    EXPECT_NEAR(pl(100), 0.47 * std::pow(100, -0.95), 1e-12);
    EXPECT_NEAR(pl(1000), 0.47 * std::pow(1000, -0.95), 1e-12);
    auto big = EnvironmentCurve::power_law(3.0, 0.5);
    EXPECT_EQ(big(1), 1.0);
    EXPECT_EQ(big(5000), std::min(1.0, 3.0 * std::pow(5000, -0.5)));
    auto doubled = pl.scaled(2.0, Environment::toxic);
    EXPECT_EQ(doubled.label, Environment::toxic);
    EXPECT_EQ(doubled(1), 0.94);
    EXPECT_NEAR(doubled(500), 2 * pl(500), 1e-12);
    EXPECT_EQ(pl.scaled(3.0, Environment::toxic)(1), 1.0);
    EXPECT_THROW(EnvironmentCurve::constant(1.5), SimulationError);
}

TEST(Curve, FromLeaveCurve) {
    LeaveCurve curve;
    curve.probability[0] = 0.5;
    curve.probability[2] = 0.2;
    EXPECT_THROW(EnvironmentCurve::from_leave_curve(curve, Environment::toxic), SimulationError);
    curve.fit = PowerLawFit{1.0, 0.6, 2};
    auto env = EnvironmentCurve::from_leave_curve(curve, Environment::toxic);
    EXPECT_EQ(env(1), 0.5);
    EXPECT_NEAR(env(2), 0.3, 1e-12);
    EXPECT_EQ(env(3), 0.2);
    EXPECT_NEAR(env(200), 0.003, 1e-12);
}

TEST(Scenario, Schedules) {
    auto s1 = Scenario::standard(1, 0.5), s2 = Scenario::standard(2, 0.5), s3 = Scenario::standard(3, 0.5);
    EXPECT_EQ(s1.arrivals(1), 1000u);
    EXPECT_EQ(s1.arrivals(2), 0u);
    EXPECT_EQ(s2.arrivals(1999), 1u);
    EXPECT_EQ(s3.arrivals(500), 1u);
    EXPECT_EQ(s3.arrivals(501), 0u);
    EXPECT_EQ(s1.horizon, 2000);
    EXPECT_THROW(Scenario::standard(4, 0.5), SimulationError);
    EXPECT_THROW(Scenario::standard(1, 0.0).validate(), SimulationError);
    EXPECT_THROW(Scenario::standard(1, 0.5, 0).validate(), SimulationError);
}

TEST(Simulate, AbsorbingCurve) {
    auto s = Scenario::standard(3, 0.5, 600);
    auto r = simulate(s, EnvironmentCurve::constant(1.0), 3);
    EXPECT_EQ(r.arrivals, 500u);
    EXPECT_EQ(r.departures, 500u);
    EXPECT_EQ(r.final_population, 0u);
    for (int d = 0; d <= 600; ++d) EXPECT_EQ(r.population[static_cast<std::size_t>(d)], s.arrivals(d)) << d;
}

TEST(Simulate, NoDepartures) {
    auto s = Scenario::standard(2, 0.5, 300);
    auto r = simulate(s, EnvironmentCurve::constant(0.0), 4);
    EXPECT_EQ(r.departures, 0u);
    for (int d = 0; d <= 300; ++d) EXPECT_EQ(r.population[static_cast<std::size_t>(d)], static_cast<std::uint64_t>(d));
}

// Oracle: survivors of k contributions are Binomial(1000, (1 - q)^k).
TEST(Simulate, GeometricDecay) {
    auto s = Scenario::standard(1, 1.0, 2000);
    auto env = EnvironmentCurve::constant(0.1);
    const int R = 40;
    std::array<double, 11> mean{};
    for (int r = 0; r < R; ++r) {
        auto res = simulate(s, env, replicate_seed(5, 1, static_cast<std::size_t>(r)));
        for (int k = 1; k <= 10; ++k) mean[static_cast<std::size_t>(k)] += res.survived[static_cast<std::size_t>(k)] / double(R);
    }
    for (int k = 1; k <= 10; ++k) {
        double p = std::pow(0.9, k);
        double sigma = std::sqrt(1000 * p * (1 - p) / R);
        EXPECT_NEAR(mean[static_cast<std::size_t>(k)], 1000 * p, 3.5 * sigma) << k;
    }
}

TEST(Simulate, ConservationAndSteps) {
    auto env = EnvironmentCurve::power_law(0.47, 0.95);
    for (int id : {1, 2, 3}) {
        auto s = Scenario::standard(id, 0.5, 800);
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto r = simulate(s, env, seed);
            ASSERT_EQ(r.arrivals - r.departures, r.final_population);
            ASSERT_EQ(r.population.size(), 801u);
            // agents leaving on the last day still count as present that day
            ASSERT_GE(r.population.back(), r.final_population);
            for (std::size_t k = 1; k < r.population.size(); ++k) {
                auto arrivals = s.arrivals(static_cast<int>(k));
                ASSERT_LE(r.population[k], r.population[k - 1] + arrivals);
            }
        }
    }
}

TEST(Simulate, GapsAreExponential) {
    auto s = Scenario::standard(1, 0.4, 2000);
    auto r = simulate(s, EnvironmentCurve::constant(0.01), 6, {.record_gaps = true});
    ASSERT_GT(r.gaps.size(), 50000u);
    auto ks = stats::ks_test(r.gaps, [](double x) { return x <= 0 ? 0.0 : -std::expm1(-0.4 * x); });
    EXPECT_GT(ks.p_value, 0.01);
}

// Shared per-agent randomness makes dominance hold path by path.
TEST(Simulate, MonotoneDominance) {
    auto low = EnvironmentCurve::power_law(0.3, 0.9);
    auto high = low.scaled(1.7, Environment::toxic);
    for (int id : {1, 2}) {
        auto s = Scenario::standard(id, 0.5, 700);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto a = simulate(s, high, seed), b = simulate(s, low, seed);
            for (std::size_t k = 0; k < a.population.size(); ++k) ASSERT_LE(a.population[k], b.population[k]);
        }
    }
}

TEST(Simulate, EditedWithinMetric) {
    auto s = custom([](int d) -> std::uint64_t { return d == 0 ? 1 : 0; }, 50, 1e-6);
    auto r = simulate(s, EnvironmentCurve::constant(0.0), 1, {.edited_within_days = 10});
    for (int d = 0; d <= 50; ++d) EXPECT_EQ(r.population[static_cast<std::size_t>(d)], d < 10 ? 1u : 0u) << d;
    EXPECT_EQ(r.final_population, 1u);
    EXPECT_THROW(simulate(s, EnvironmentCurve::constant(0.0), 1, {.edited_within_days = 0}), SimulationError);
}

TEST(Run, GridAndDeterminism) {
    auto nontoxic = EnvironmentCurve::power_law(0.47, 0.95);
    auto toxic = nontoxic.scaled(2.0, Environment::toxic);
    RunOptions opts;
    opts.horizon = 300;
    auto a = run_scenarios(toxic, nontoxic, 0.5, 2, 7, opts);
    auto b = run_scenarios(toxic, nontoxic, 0.5, 2, 7, opts);
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mean_population, b[i].mean_population);
        EXPECT_EQ(a[i].std_population, b[i].std_population);
        EXPECT_EQ(a[i].mean_population.size(), 301u);
        EXPECT_EQ(a[i].replicates, 2u);
    }
    EXPECT_EQ(a[0].scenario, 1);
    EXPECT_EQ(a[0].environment, Environment::toxic);
    EXPECT_EQ(a[1].environment, Environment::non_toxic);
    EXPECT_EQ(a[5].scenario, 3);
    EXPECT_THROW(run_scenarios(toxic, nontoxic, 0.5, 0, 7, opts), SimulationError);

    auto c = run_scenarios(toxic, nontoxic, 0.5, 1, 7, {.scenarios = {2}, .horizon = 300});
    auto d = simulate(Scenario::standard(2, 0.5, 300), toxic, replicate_seed(7, 2, 0));
    for (std::size_t k = 0; k < d.population.size(); ++k) EXPECT_EQ(c[0].mean_population[k], double(d.population[k]));
    EXPECT_NE(replicate_seed(7, 2, 1), replicate_seed(7, 2, 0));
}
