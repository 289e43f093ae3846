#include <gtest/gtest.h>

#include <cmath>

#include "synthetic.hpp"
#include "wikitox/leaving.hpp"

using namespace wikitox;
using namespace wikitox::testing;

namespace {

ContributionLog log_at(std::vector<std::int64_t> seconds) {
    std::vector<Instant> ts;
    for (auto s : seconds) ts.push_back(instant_from_epoch(s));
    return ContributionLog::make("U", ts);
}

std::vector<Instant> times(std::vector<std::int64_t> seconds) {
    std::vector<Instant> out;
    for (auto s : seconds) out.push_back(instant_from_epoch(s));
    return out;
}

// User with n contributions one day apart, ending long before the data end.
LabeledHistory career(std::string name, int n, std::vector<int> toxic_ranks = {}, std::int64_t start_day = 0) {
    LabeledHistory h;
    h.user = std::move(name);
    for (int k = 1; k <= n; ++k) {
        LabeledContribution c;
        c.index = static_cast<std::uint32_t>(k);
        c.timestamp = kEpoch + Seconds{(start_day + k) * kDay};
        c.followed_by_toxic = std::find(toxic_ranks.begin(), toxic_ranks.end(), k) != toxic_ranks.end();
        c.is_last = k == n;
        h.contributions.push_back(c);
    }
    return h;
}

const Instant kEnd = kEpoch + Seconds{5000 * kDay};

}  // namespace

TEST(Label, Rules) {
    auto l = label_contributions(log_at({10, 20}), times({15}));
    EXPECT_TRUE(l[0].followed_by_toxic);
    EXPECT_FALSE(l[1].followed_by_toxic);
    EXPECT_EQ(l[0].index, 1u);
    EXPECT_TRUE(l[1].is_last);
    EXPECT_FALSE(l[0].is_last);

    l = label_contributions(log_at({10, 20}), times({10}));
    EXPECT_FALSE(l[0].followed_by_toxic);
    EXPECT_FALSE(l[1].followed_by_toxic);

    l = label_contributions(log_at({10, 20, 30}), times({25, 27}));
    EXPECT_FALSE(l[0].followed_by_toxic);
    EXPECT_TRUE(l[1].followed_by_toxic);
    EXPECT_FALSE(l[2].followed_by_toxic);

    l = label_contributions(log_at({10, 20}), times({5, 100}));
    EXPECT_FALSE(l[0].followed_by_toxic);
    EXPECT_TRUE(l[1].followed_by_toxic);
}

TEST(Label, IndicesAreContiguous) {
    Rng rng = make_rng(1, "label");
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::int64_t> s;
        for (int k = 0; k < 30; ++k) s.push_back(static_cast<std::int64_t>(uniform_index(rng, 10000)));
        auto log = log_at(s);
        auto l = label_contributions(log, {});
        int lasts = 0;
        for (std::size_t i = 0; i < l.size(); ++i) {
            ASSERT_EQ(l[i].index, i + 1);
            lasts += l[i].is_last;
        }
        ASSERT_EQ(lasts, 1);
    }
}

TEST(Curve, TenUserHandFixture) {
    std::vector<LabeledHistory> users;
    for (int i = 0; i < 4; ++i) users.push_back(career("Quit" + std::to_string(i), 1));
    for (int i = 0; i < 6; ++i) users.push_back(career("Stay" + std::to_string(i), 3 + i));
    auto curve = leave_curve(users, Cohort::all, 100, kEnd);
    ASSERT_TRUE(curve.p(1));
    EXPECT_EQ(*curve.p(1), 0.4);
    EXPECT_EQ(curve.exactly[0], 4u);
    EXPECT_EQ(curve.at_least[0], 10u);
    EXPECT_EQ(*curve.p(2), 0.0);
    EXPECT_EQ(*curve.p(3), 1.0 / 6.0);
}

TEST(Curve, CensoringRule) {
    std::vector<LabeledHistory> users{career("Recent", 2, {}, 0)};
    Instant end = users[0].contributions.back().timestamp + Seconds{3 * kDay};
    auto curve = leave_curve(users, Cohort::all, 100, end);
    EXPECT_EQ(curve.exactly[1], 0u);
    EXPECT_EQ(curve.at_least[0], 1u);
    EXPECT_EQ(curve.at_least[1], 0u);
    EXPECT_FALSE(curve.p(2));
    auto uncensored = leave_curve(users, Cohort::all, 2, end);
    EXPECT_EQ(uncensored.exactly[1], 1u);
    EXPECT_THROW(leave_curve(users, Cohort::all, -1, end), std::invalid_argument);
}

TEST(Curve, EmptyToxicCohort) {
    std::vector<LabeledHistory> users;
    for (int i = 0; i < 5; ++i) users.push_back(career("Same" + std::to_string(i), 4));
    auto toxic = leave_curve(users, Cohort::toxic_followed, 100, kEnd);
    for (int n = 1; n <= kMaxRank; ++n) EXPECT_FALSE(toxic.p(n));
    auto careers = summarize_careers(users, 100, kEnd);
    auto report = curve_significance(careers, 50, 1);
    EXPECT_TRUE(report.compared.empty());
    EXPECT_TRUE(report.disjoint.empty());
}

TEST(Curve, CapAtHundred) {
    std::vector<LabeledHistory> users{career("Long", 150, {120})};
    auto all = leave_curve(users, Cohort::all, 100, kEnd);
    EXPECT_EQ(all.at_least[99], 1u);
    EXPECT_EQ(all.exactly[99], 0u);
    auto toxic = leave_curve(users, Cohort::toxic_followed, 100, kEnd);
    for (auto v : toxic.at_least) EXPECT_EQ(v, 0u);
}

TEST(Curve, RepeatedLabelCountsOnce) {
    auto log = log_at({0, kDay, 2 * kDay});
    std::vector<LabeledHistory> h{{"U", label_contributions(log, times({kDay + 5, kDay + 9}))}};
    auto toxic = leave_curve(h, Cohort::toxic_followed, 0, instant_from_epoch(100 * kDay));
    EXPECT_EQ(toxic.at_least[1], 1u);
}

TEST(Curve, TelescopingPartitionAndTranslation) {
    Rng rng = make_rng(2, "careers");
    CareerModel model{.leave = [](int n) { return 0.3 * std::pow(n, -0.8); }, .toxic_rate = 0.1, .toxic_factor = 2.0,
                      .cap = 150};
    for (int trial = 0; trial < 20; ++trial) {
        auto users = random_careers(500, model, rng);
        auto all = leave_curve(users, Cohort::all, 100, kCareerEnd);
        auto tox = leave_curve(users, Cohort::toxic_followed, 100, kCareerEnd);
        auto other = leave_curve(users, Cohort::other, 100, kCareerEnd);
        for (std::size_t i = 0; i < kMaxRank; ++i) {
            ASSERT_EQ(tox.exactly[i] + other.exactly[i], all.exactly[i]);
            ASSERT_EQ(tox.at_least[i] + other.at_least[i], all.at_least[i]);
            for (const auto* c : {&all, &tox, &other}) {
                if (c->at_least[i] > 0) {
                    ASSERT_EQ(*c->probability[i],
                              static_cast<double>(c->exactly[i]) / static_cast<double>(c->at_least[i]));
                    ASSERT_GE(*c->probability[i], 0.0);
                    ASSERT_LE(*c->probability[i], 1.0);
                } else {
                    ASSERT_FALSE(c->probability[i]);
                }
            }
        }
        // no censoring: capped careers also stop counting past rank 100
        auto plain = leave_curve(users, Cohort::all, 0, kCareerEnd + Seconds{kDay});
        for (std::size_t i = 0; i + 1 < kMaxRank; ++i) {
            ASSERT_EQ(plain.at_least[i], plain.at_least[i + 1] + plain.exactly[i]);
        }
        auto shifted = users;
        for (auto& h : shifted) {
            for (auto& c : h.contributions) c.timestamp += Seconds{777 * kDay};
        }
        auto moved = leave_curve(shifted, Cohort::all, 100, kCareerEnd + Seconds{777 * kDay});
        for (std::size_t i = 0; i < kMaxRank; ++i) ASSERT_EQ(moved.probability[i], all.probability[i]);
    }
}

TEST(Fit, ExactRecovery) {
    std::vector<int> ranks;
    std::vector<double> probs;
    for (int n = 1; n <= 100; ++n) {
        ranks.push_back(n);
        probs.push_back(0.5 * std::pow(n, -0.95));
    }
    auto fit = fit_power_law(ranks, probs);
    EXPECT_NEAR(fit.alpha, 0.95, 1e-9);
    EXPECT_NEAR(fit.c, 0.5, 1e-9);
    EXPECT_EQ(fit.points, 100u);
    for (double& p : probs) p *= 0.1;
    auto scaled = fit_power_law(ranks, probs);
    EXPECT_NEAR(scaled.alpha, fit.alpha, 1e-9);
    EXPECT_NEAR(scaled.c, 0.1 * fit.c, 1e-9);
}

TEST(Fit, SkipsZerosAndNeedsThreePoints) {
    std::vector<int> ranks{1, 2, 3, 4};
    std::vector<double> probs{0.4, 0.0, 0.4 * std::pow(3, -1.0), 0.4 * std::pow(4, -1.0)};
    auto fit = fit_power_law(ranks, probs);
    EXPECT_EQ(fit.points, 3u);
    EXPECT_NEAR(fit.alpha, 1.0, 1e-9);
    std::vector<double> two{0.4, 0.0, 0.0, 0.1};
    EXPECT_THROW(fit_power_law(ranks, two), FitError);
    LeaveCurve empty;
    EXPECT_THROW(fit_power_law(empty), FitError);
}

TEST(Fit, PublishedEndpoints) {
    std::vector<int> ranks{1, 100};
    double alpha = std::log(0.47 / 0.007) / std::log(100.0);
    EXPECT_NEAR(alpha, 0.913, 1e-3);
    std::vector<int> r;
    std::vector<double> p;
    for (int n : {1, 10, 100}) {
        r.push_back(n);
        p.push_back(0.47 * std::pow(n, -alpha));
    }
    EXPECT_NEAR(fit_power_law(r, p).alpha, alpha, 1e-9);
    std::vector<double> ends{0.47, 0.007};
    EXPECT_THROW(fit_power_law(ranks, ends), FitError);
    auto two = fit_power_law(ranks, ends, 2);
    EXPECT_NEAR(two.alpha, alpha, 1e-12);
    EXPECT_NEAR(two.c, 0.47, 1e-12);
}

TEST(Significance, DetectsDoubledLeaveProbability) {
    Rng rng = make_rng(3, "signif");
    CareerModel model{.leave = [](int n) { return 0.2 * std::pow(n, -0.7); }, .toxic_rate = 0.5, .toxic_factor = 2.0,
                      .cap = 150};
    auto users = random_careers(20000, model, rng);
    auto careers = summarize_careers(users, 100, kCareerEnd);
    auto report = curve_significance(careers, 200, 5);
    int early = 0, early_disjoint = 0;
    for (int n : report.compared) {
        if (n <= 20) ++early;
    }
    for (int n : report.disjoint) {
        if (n <= 20) ++early_disjoint;
    }
    EXPECT_EQ(early, 20);
    EXPECT_GE(early_disjoint, 18);
    EXPECT_NEAR(report.p_bound(), 6.25e-4, 1e-12);
}

TEST(Significance, IdenticalCohortsRarelyDisjoint) {
    Rng rng = make_rng(4, "signif");
    CareerModel model{.leave = [](int n) { return 0.2 * std::pow(n, -0.7); }, .toxic_rate = 0.3, .toxic_factor = 1.0,
                      .cap = 150};
    auto users = random_careers(4000, model, rng);
    auto careers = summarize_careers(users, 100, kCareerEnd);
    auto report = curve_significance(careers, 200, 6);
    ASSERT_GT(report.compared.size(), 20u);
    EXPECT_LE(report.disjoint.size(), report.compared.size() / 5);
}

TEST(Significance, Deterministic) {
    Rng rng = make_rng(5, "signif");
    CareerModel model{.leave = [](int) { return 0.3; }, .toxic_rate = 0.3, .toxic_factor = 1.5, .cap = 150};
    auto careers = summarize_careers(random_careers(500, model, rng), 100, kCareerEnd);
    auto a = curve_significance(careers, 50, 9);
    auto b = curve_significance(careers, 50, 9);
    for (std::size_t i = 0; i < kMaxRank; ++i) {
        ASSERT_EQ(a.toxic_ci[i].has_value(), b.toxic_ci[i].has_value());
        if (a.toxic_ci[i]) ASSERT_EQ(a.toxic_ci[i]->low, b.toxic_ci[i]->low);
    }
}

TEST(Analyze, FromScoredComments) {
    std::vector<ContributionLog> logs;
    std::vector<ScoredComment> scored;
    for (int u = 0; u < 30; ++u) {
        std::vector<Instant> ts;
        int n = 1 + u % 5;
        for (int k = 0; k < n; ++k) ts.push_back(kEpoch + Seconds{(u + k) * kDay});
        logs.push_back(ContributionLog::make("U" + std::to_string(u), ts));
        ScoredComment sc;
        sc.comment.recipient = logs.back().user;
        sc.comment.timestamp = ts.front() + Seconds{60};
        sc.scores.values.fill(u % 2 ? 0.9 : 0.1);
        scored.push_back(sc);
    }
    logs.push_back(ContributionLog::make("Active", {kEpoch + Seconds{1000 * kDay}}));
    LeavingConfig cfg;
    cfg.bootstrap_resamples = 50;
    auto a = analyze_leaving(logs, scored, cfg);
    EXPECT_EQ(a.users, 31u);
    EXPECT_EQ(a.dataset_end, kEpoch + Seconds{1000 * kDay});
    EXPECT_EQ(a.toxic.at_least[0], 15u);
    EXPECT_EQ(a.other.at_least[0], 15u);
    EXPECT_EQ(a.all.at_least[0], 30u);  // the censored user contributes no rank
    EXPECT_EQ(a.toxic.exactly[0], 3u);  // odd users with one contribution: 5, 15, 25
    EXPECT_TRUE(a.all.fit);
}
