#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "synthetic.hpp"
#include "wikitox/loss_estimator.hpp"
#include "wikitox/stats.hpp"

using namespace wikitox;
using namespace wikitox::testing;

namespace {

RepScores constant_scores(std::size_t n, std::int16_t v) { return RepScores{std::vector<std::int16_t>(n, v)}; }

UserRecord user(std::string name, std::vector<std::int64_t> edit_days, std::vector<std::pair<double, double>> received) {
    std::vector<Instant> ts;
    for (auto d : edit_days) ts.push_back(kEpoch + Seconds{d * kDay});
    UserRecord u;
    u.log = ContributionLog::make(std::move(name), ts);
    for (auto [day, score] : received) {
        u.received.push_back({kEpoch + Seconds{static_cast<std::int64_t>(day * kDay)}, score});
    }
    return u;
}

std::vector<UserRecord> small_pool() {
    std::vector<UserRecord> users;
    users.push_back(user("Tox1", {1, 2, 3, 50, 51}, {{10, 0.95}}));
    users.push_back(user("Tox2", {1, 5, 9, 40}, {{20, 0.85}, {30, 0.9}}));
    users.push_back(user("Both", {2, 4, 6}, {{5, 0.1}, {7, 0.99}}));
    users.push_back(user("Calm1", {1, 3, 5, 7, 9}, {{4, 0.1}}));
    users.push_back(user("Calm2", {2, 20}, {{3, 0.3}}));
    return users;
}

// Pre-window average over contributions, computed from the edit-day pattern.
double class_pre_mean(int length, const std::function<bool(int)>& pattern) {
    double sum = 0.0;
    int n = 0;
    for (int j = 0; j < length; ++j) {
        if (!pattern(j)) continue;
        int active = 0;
        for (int k = std::max(0, j - 99); k <= j; ++k) active += pattern(k) ? 1 : 0;
        sum += active;
        ++n;
    }
    return sum / n;
}

}  // namespace

TEST(Delta, Constants) {
    auto est = delta(constant_scores(10, -2), constant_scores(12, 0), {.bootstrap_resamples = 200});
    EXPECT_DOUBLE_EQ(est.delta, -2.0);
    EXPECT_EQ(est.p_value, 0.0);
    EXPECT_DOUBLE_EQ(est.ci_low, -2.0);
    EXPECT_DOUBLE_EQ(est.ci_high, -2.0);
    EXPECT_EQ(est.n_toxic, 10u);
    EXPECT_EQ(est.n_control, 12u);
    EXPECT_EQ(delta(constant_scores(3, 4), constant_scores(3, 4)).p_value, 1.0);
}

TEST(Delta, MatchesWelchOnScores) {
    RepScores t{{-3, 1, -4, 0, -2, 5, -1}};
    RepScores c{{2, 0, 1, -1, 3, 2}};
    auto est = delta(t, c, {.bootstrap_resamples = 500, .seed = 3});
    std::vector<double> a(t[0].begin(), t[0].end()), b(c[0].begin(), c[0].end());
    EXPECT_NEAR(est.delta, stats::mean(a) - stats::mean(b), 1e-12);
    EXPECT_NEAR(est.p_value, stats::welch_t_test(a, b).p_value, 1e-12);
    EXPECT_LE(est.ci_low, est.delta);
    EXPECT_GE(est.ci_high, est.delta);
    EXPECT_LT(est.ci_low, est.ci_high);
}

TEST(Delta, SignConvention) {
    Rng rng = make_rng(1, "sign");
    auto toxic = bernoulli_events(300, 0.3, 0.2, EventKind::toxic, rng);
    auto control = bernoulli_events(300, 0.3, 0.3, EventKind::control, rng);
    auto est = delta(toxic, control, {.bootstrap_resamples = 200});
    EXPECT_LT(est.delta, 0.0);
    EXPECT_NEAR(est.toxic_before, 30.0, 2.0);
    EXPECT_NEAR(est.toxic_after, 20.0, 2.0);
    EXPECT_NEAR(est.delta, (est.toxic_after - est.toxic_before) - (est.control_after - est.control_before), 1e-9);
}

TEST(Delta, GenerativeRecovery) {
    Rng rng = make_rng(2, "recovery");
    auto toxic = bernoulli_events(5000, 0.3, 0.25, EventKind::toxic, rng);
    auto control = bernoulli_events(5000, 0.3, 0.3, EventKind::control, rng);
    auto est = delta(toxic, control, {.bootstrap_resamples = 500, .seed = 9});
    EXPECT_NEAR(est.delta, -5.0, 0.5);
    EXPECT_LT(est.ci_low, est.delta);
    EXPECT_GT(est.ci_high, est.delta);
    EXPECT_LT(est.p_value, 1e-10);
}

TEST(Delta, CiContainsEstimateAcrossRepetitions) {
    Rng rng = make_rng(4, "reps");
    RepScores t(5), c(5);
    for (int r = 0; r < 5; ++r) {
        for (int k = 0; k < 40; ++k) {
            t[r].push_back(static_cast<std::int16_t>(uniform_index(rng, 9)) - 4);
            c[r].push_back(static_cast<std::int16_t>(uniform_index(rng, 9)) - 4);
        }
    }
    auto est = delta(t, c, {.bootstrap_resamples = 300});
    EXPECT_LE(est.ci_low, est.delta);
    EXPECT_GE(est.ci_high, est.delta);
    double mean = 0;
    for (int r = 0; r < 5; ++r) mean += delta(RepScores{t[r]}, RepScores{c[r]}, {.bootstrap_resamples = 0}).delta / 5;
    EXPECT_NEAR(est.delta, mean, 1e-12);
}

TEST(Delta, Errors) {
    EXPECT_THROW(delta(RepScores{{}}, constant_scores(3, 0)), DataError);
    EXPECT_THROW(delta(RepScores{}, RepScores{}), std::invalid_argument);
}

TEST(Delta, SymmetricSplit) {
    CenteredWindow w;
    w.set(0);
    w.set(100);
    w.set(-1);
    std::vector<EventSample> t{{0, kEpoch, EventKind::toxic, w}};
    std::vector<EventSample> c{{1, kEpoch, EventKind::control, CenteredWindow{}}};
    EXPECT_DOUBLE_EQ(delta(t, c, {.bootstrap_resamples = 0}).delta, 0.0);  // day 0 after, day 100 out
    DeltaOptions sym{.bootstrap_resamples = 0, .split = DaySplit::symmetric()};
    EXPECT_DOUBLE_EQ(delta(t, c, sym).delta, 0.0);  // day 0 out, day 100 in
    w.set(50);
    t[0].window = w;
    EXPECT_DOUBLE_EQ(delta(t, c, sym).delta, 1.0);
}

TEST(PickToxic, SingleToxicCommentIsStable) {
    auto users = small_pool();
    auto events = pick_toxic_events(users, 0.8, 42, 100);
    ASSERT_EQ(events.repetitions.size(), 100u);
    EXPECT_EQ(events.excluded_users, 2u);
    std::set<std::int64_t> tox1, tox2;
    for (const auto& rep : events.repetitions) {
        ASSERT_EQ(rep.size(), 3u);
        for (const auto& e : rep) {
            EXPECT_EQ(e.window.center, e.event_time);
            if (users[e.user].log.user == "Tox1") tox1.insert(epoch_seconds(e.event_time));
            if (users[e.user].log.user == "Tox2") tox2.insert(epoch_seconds(e.event_time));
        }
    }
    EXPECT_EQ(tox1.size(), 1u);
    EXPECT_EQ(tox2.size(), 2u);
}

TEST(PickToxic, Deterministic) {
    auto users = small_pool();
    auto a = pick_toxic_events(users, 0.8, 7, 20);
    auto b = pick_toxic_events(users, 0.8, 7, 20);
    for (std::size_t r = 0; r < 20; ++r) {
        for (std::size_t k = 0; k < a.repetitions[r].size(); ++k) {
            EXPECT_EQ(a.repetitions[r][k].event_time, b.repetitions[r][k].event_time);
        }
    }
}

TEST(PickToxic, EmptyCohort) {
    std::vector<UserRecord> users{user("Calm", {1, 2}, {{1, 0.2}})};
    try {
        pick_toxic_events(users, 0.8, 1);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(std::string(e.what()), "empty toxic cohort");
    }
}

TEST(Virtual, AlwaysReturnsAtPOne) {
    Rng rng = make_rng(5, "virtual");
    auto log = periodic_log("U", 30, [](int d) { return d % 3 == 0; });
    std::vector<int> hits(30, 0);
    for (int i = 0; i < 10000; ++i) {
        auto e = virtual_toxic_events(log, 1.0, rng);
        ASSERT_TRUE(e);
        auto day = (*e - kEpoch).count() / kDay;
        ASSERT_EQ((*e - kEpoch).count() % kDay, 1);
        ++hits[static_cast<std::size_t>(day)];
    }
    for (int d = 0; d < 30; d += 3) EXPECT_NEAR(hits[static_cast<std::size_t>(d)], 1000, 120);
}

// Oracle: inclusion probability 1 - (1 - p)^n.
TEST(Virtual, InclusionProbability) {
    Rng rng = make_rng(6, "virtual");
    for (auto [p, n] : {std::pair{0.01, 1}, std::pair{0.05, 10}, std::pair{0.2, 3}}) {
        auto log = periodic_log("U", n, [](int) { return true; });
        const int trials = 40000;
        int included = 0;
        for (int i = 0; i < trials; ++i) included += virtual_toxic_events(log, p, rng) ? 1 : 0;
        double expect = 1 - std::pow(1 - p, n);
        double sigma = std::sqrt(expect * (1 - expect) / trials);
        EXPECT_NEAR(included / static_cast<double>(trials), expect, 3 * sigma) << "p=" << p << " n=" << n;
    }
    EXPECT_THROW(virtual_toxic_events(ContributionLog{}, 0.0, rng), std::invalid_argument);
}

TEST(ControlPool, Membership) {
    auto users = small_pool();
    ControlPool pool(users, 0.8);
    ASSERT_EQ(pool.size(), 2u);
    EXPECT_EQ(users[pool.members()[0]].log.user, "Calm1");
    EXPECT_EQ(users[pool.members()[1]].log.user, "Calm2");
    ControlPool lenient(users, 0.8, {.excludes_toxic_recipients = false});
    EXPECT_EQ(lenient.size(), 3u);
}

TEST(ControlPool, NearestNonToxicCenter) {
    auto users = small_pool();
    ControlPool pool(users, 0.8, {.center_on = CenterOn::nearest_nontoxic_comment});
    auto events = pool.draw(1.0, 3, 0);
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0].event_time, kEpoch + Seconds{4 * kDay});
    EXPECT_EQ(events[1].event_time, kEpoch + Seconds{3 * kDay});
}

// Objective equals the mean over realized draws.
TEST(Calibration, ObjectiveIsTheDrawExpectation) {
    std::vector<UserRecord> users;
    for (int i = 0; i < 6; ++i) {
        int period = 1 + i;
        auto u = user("C" + std::to_string(i), {}, {{1, 0.1}});
        u.log = periodic_log(u.log.user, 200 + 30 * i, [=](int d) { return d % period == 0; });
        users.push_back(u);
    }
    ControlPool pool(users, 0.8);
    const double p = 0.01;
    double sum = 0.0;
    std::size_t n = 0;
    for (int rep = 0; rep < 4000; ++rep) {
        for (const auto& e : pool.draw(p, 11, rep)) {
            sum += e.window.before();
            ++n;
        }
    }
    EXPECT_NEAR(sum / static_cast<double>(n), pool.expected_pre_mean(p), 0.6);
}

TEST(Calibration, ConstantObjective) {
    std::vector<UserRecord> users;
    for (int i = 0; i < 5; ++i) {
        auto u = user("Same" + std::to_string(i), {}, {{1, 0.1}});
        u.log = periodic_log(u.log.user, 300, [](int d) { return d % 2 == 0; });
        users.push_back(u);
    }
    ControlPool pool(users, 0.8);
    auto r = calibrate_p(pool.expected_pre_mean(0.5), pool);
    EXPECT_LE(r.steps, 1);
}

TEST(Calibration, TwoClassClosedForm) {
    auto high = [](int d) { return d % 5 != 4; };
    auto low = [](int d) { return d % 10 == 0; };
    std::vector<UserRecord> users;
    for (int i = 0; i < 20; ++i) {
        auto u = user("H" + std::to_string(i), {}, {{1, 0.1}});
        u.log = periodic_log(u.log.user, 300, high);
        users.push_back(u);
        auto v = user("L" + std::to_string(i), {}, {{1, 0.1}});
        v.log = periodic_log(v.log.user, 1000, low);
        users.push_back(v);
    }
    ControlPool pool(users, 0.8);
    const double mh = class_pre_mean(300, high), ml = class_pre_mean(1000, low);
    const double nh = 240, nl = 100;
    for (double p : {1e-4, 0.003, 0.02, 0.3, 1.0}) {
        double wh = 1 - std::pow(1 - p, nh), wl = 1 - std::pow(1 - p, nl);
        EXPECT_NEAR(pool.expected_pre_mean(p), (wh * mh + wl * ml) / (wh + wl), 1e-9) << p;
    }
    // direction: small p favors users with many contributions, here the active class
    double prev = pool.expected_pre_mean(1e-6);
    for (double p = 1e-3; p <= 1.0; p += 1e-2) {
        double now = pool.expected_pre_mean(p);
        EXPECT_LE(now, prev + 1e-12);
        prev = now;
    }
    EXPECT_THROW(calibrate_p(mh + 1, pool), CalibrationError);
    try {
        calibrate_p(0.5, pool);
        FAIL();
    } catch (const CalibrationError& e) {
        EXPECT_NEAR(e.value_at_max(), (mh + ml) / 2, 1e-9);
        EXPECT_GT(e.value_at_min(), e.value_at_max());
    }
}

TEST(Loss, HumanYears) {
    EXPECT_NEAR(total_loss_human_years(-1.207, 80'307), 265.4, 0.1);
    EXPECT_NEAR(total_loss_human_years(-1.219, 1'687), 5.63, 0.01);
    EXPECT_EQ(total_loss_human_years(0.0, 12345), 0.0);
}

TEST(Records, JoinByRecipient) {
    ScoredComment a, b, c;
    a.comment.recipient = "Alice";
    a.comment.timestamp = kEpoch + Seconds{50};
    a.scores.values.fill(0.9);
    b.comment.recipient = "Alice";
    b.comment.timestamp = kEpoch;
    c.comment.recipient = "Ghost";
    std::vector<ScoredComment> scored{a, b, c};
    std::vector<ContributionLog> logs{ContributionLog::make("Alice", {kEpoch}), ContributionLog::make("Zed", {kEpoch})};
    CohortBuildReport report;
    auto users = build_user_records(scored, logs, &report);
    ASSERT_EQ(users.size(), 1u);
    EXPECT_EQ(report.recipients_without_contributions, 1u);
    ASSERT_EQ(users[0].received.size(), 2u);
    EXPECT_LT(users[0].received[0].time, users[0].received[1].time);
    EXPECT_DOUBLE_EQ(users[0].received[1].max_score, 0.9);
}

class LossPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        users_ = new std::vector<UserRecord>(
            poisson_population({.toxic_users = 800, .control_users = 800, .days = 600}, 21));
    }
    static void TearDownTestSuite() { delete users_; }
    static LossConfig config() {
        LossConfig c;
        c.repetitions = 10;
        c.bootstrap_resamples = 200;
        return c;
    }
    static std::vector<UserRecord>* users_;
};
std::vector<UserRecord>* LossPipeline::users_ = nullptr;

TEST_F(LossPipeline, RecoversPlantedDropAndMatches) {
    auto a = analyze_loss(*users_, config());
    EXPECT_EQ(a.toxic_users, 800u);
    EXPECT_EQ(a.excluded_users, 800u);
    EXPECT_EQ(a.control_pool, 800u);
    EXPECT_TRUE(a.matching_within_tolerance) << a.toxic_pre_mean << " vs " << a.control_pre_mean;
    EXPECT_NEAR(a.calibration.achieved, a.toxic_pre_mean, config().calibration.tolerance);
    EXPECT_NEAR(a.estimate.delta, -5.0, 2.0);
    EXPECT_EQ(a.toxic_profile.size(), static_cast<std::size_t>(kWindowLength));
    EXPECT_LE(a.estimate.ci_low, a.estimate.delta);
    EXPECT_GE(a.estimate.ci_high, a.estimate.delta);
}

TEST_F(LossPipeline, Deterministic) {
    auto a = analyze_loss(*users_, config());
    auto b = analyze_loss(*users_, config());
    EXPECT_EQ(a.estimate.delta, b.estimate.delta);
    EXPECT_EQ(a.estimate.ci_low, b.estimate.ci_low);
    EXPECT_EQ(a.estimate.p_value, b.estimate.p_value);
    EXPECT_EQ(a.calibration.p, b.calibration.p);
}

TEST_F(LossPipeline, SweepNestingAndNoOpFilter) {
    std::vector<double> thresholds{0.5, 0.8, 0.99};
    std::vector<int> filters{0, 10, 20, 90};
    auto grid = robustness_sweep(*users_, thresholds, filters, config());
    ASSERT_EQ(grid.cells.size(), 12u);
    auto base = analyze_loss(*users_, config());
    ASSERT_TRUE(grid.at(1, 0).estimate);
    EXPECT_EQ(grid.at(1, 0).estimate->delta, base.estimate.delta);
    EXPECT_EQ(grid.at(1, 0).estimate->ci_low, base.estimate.ci_low);
    for (std::size_t ti = 0; ti < 2; ++ti) {
        for (std::size_t xi = 1; xi < 3; ++xi) {
            ASSERT_TRUE(grid.at(ti, xi).estimate);
            EXPECT_LE(grid.at(ti, xi).estimate->n_toxic, grid.at(ti, xi - 1).estimate->n_toxic);
            EXPECT_LE(grid.at(ti, xi).estimate->n_control, grid.at(ti, xi - 1).estimate->n_control);
        }
        EXPECT_FALSE(grid.at(ti, 3).estimate);  // nobody has 90 active days before
    }
    for (std::size_t xi = 0; xi < 4; ++xi) EXPECT_FALSE(grid.at(2, xi).estimate);  // no score reaches 0.99
    EXPECT_FALSE(grid.at(2, 0).note.empty());
}

TEST_F(LossPipeline, DefaultGrid) {
    EXPECT_EQ(default_sweep_thresholds().size(), 8u);
    EXPECT_EQ(default_activity_filters(), (std::vector<int>{0, 10, 20, 30, 40, 50}));
}
