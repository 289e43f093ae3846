#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "synthetic.hpp"
#include "wikitox/activity.hpp"
#include "wikitox/error.hpp"

using namespace wikitox;
using namespace wikitox::testing;

namespace {

Instant at(std::int64_t seconds) { return kEpoch + Seconds{seconds}; }

ContributionLog log_of(std::vector<std::int64_t> offsets) {
    std::vector<Instant> ts;
    for (auto o : offsets) ts.push_back(at(o));
    return ContributionLog::make("U", std::move(ts));
}

std::vector<bool> bits(std::initializer_list<int> v) {
    std::vector<bool> out;
    for (int b : v) out.push_back(b != 0);
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST(Log, SortsAndCollapsesDuplicates) {
    auto log = log_of({50, 10, 50, 30});
    ASSERT_EQ(log.timestamps.size(), 3u);
    EXPECT_TRUE(std::is_sorted(log.timestamps.begin(), log.timestamps.end()));
}

TEST(ActiveDays, Buckets) {
    EXPECT_EQ(to_active_days(log_of({0, 3600})).days, bits({1}));
    EXPECT_EQ(to_active_days(log_of({0, kDay})).days, bits({1, 1}));
    EXPECT_EQ(to_active_days(log_of({0, 2 * kDay + 1})).days, bits({1, 0, 1}));
    EXPECT_EQ(to_active_days(log_of({0, kDay - 1})).days, bits({1}));
    EXPECT_THROW(to_active_days(ContributionLog{"U", {}}), DataError);
}

TEST(ActiveDays, FirstDaySetAndBitsBounded) {
    Rng rng = make_rng(1, "active-days");
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::int64_t> offsets;
        auto n = 1 + uniform_index(rng, 40);
        for (std::size_t k = 0; k < n; ++k) offsets.push_back(static_cast<std::int64_t>(uniform_index(rng, 30 * kDay)));
        auto log = log_of(offsets);
        auto v = to_active_days(log);
        ASSERT_TRUE(v.days.front());
        ASSERT_TRUE(v.days.back());
        ASSERT_LE(v.active_days(), log.timestamps.size());
        ASSERT_EQ(v.origin, log.timestamps.front());
        // bucket partition: each timestamp's bucket is set, counted by an independent index
        for (auto t : log.timestamps) {
            auto d = static_cast<std::size_t>((t - v.origin).count() / kDay);
            ASSERT_TRUE(v.days[d]);
        }
    }
}

TEST(Window, Boundaries) {
    const Instant c = at(1000 * kDay);
    auto w = center_window(ContributionLog::make("U", {c - Seconds{1}}), c);
    EXPECT_TRUE(w.active(-1));
    EXPECT_EQ(w.bits.count(), 1u);
    w = center_window(ContributionLog::make("U", {c}), c);
    EXPECT_TRUE(w.active(0));
    EXPECT_EQ(w.bits.count(), 1u);
    w = center_window(ContributionLog::make("U", {c - Seconds{5 * kDay}, c + Seconds{5 * kDay}}), c);
    EXPECT_TRUE(w.active(-5));
    EXPECT_TRUE(w.active(5));
    EXPECT_EQ(w.bits.count(), 2u);
}

TEST(Window, EdgesOfRange) {
    const Instant c = at(1000 * kDay);
    auto w = center_window(ContributionLog::make("U", {c - Seconds{100 * kDay}, c + Seconds{101 * kDay - 1},
                                                       c - Seconds{100 * kDay + 1}, c + Seconds{101 * kDay}}),
                           c);
    EXPECT_TRUE(w.active(-100));
    EXPECT_TRUE(w.active(100));
    EXPECT_EQ(w.bits.count(), 2u);
    EXPECT_EQ(center_window(ContributionLog{"U", {}}, c).bits.count(), 0u);
}

TEST(Window, BeforeAfterSplit) {
    const Instant c = at(1000 * kDay);
    auto w = center_window(ContributionLog::make("U", {c - Seconds{kDay}, c, c + Seconds{100 * kDay}}), c);
    EXPECT_EQ(w.before(), 1);
    EXPECT_EQ(w.after(), 1);  // day 100 is outside [0, 99]
    EXPECT_EQ(w.before(DaySplit::symmetric()), 1);
    EXPECT_EQ(w.after(DaySplit::symmetric()), 1);  // day 0 out, day 100 in
}

TEST(Window, TranslationCovariance) {
    Rng rng = make_rng(2, "translate");
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::int64_t> offsets;
        for (int k = 0; k < 60; ++k) offsets.push_back(static_cast<std::int64_t>(uniform_index(rng, 400 * kDay)));
        auto log = log_of(offsets);
        Instant c = at(static_cast<std::int64_t>(uniform_index(rng, 400 * kDay)));
        auto shift = Seconds{static_cast<std::int64_t>(uniform_index(rng, 1'000'000'000)) - 500'000'000};
        std::vector<Instant> moved;
        for (auto t : log.timestamps) moved.push_back(t + shift);
        auto a = center_window(log, c);
        auto b = center_window(ContributionLog::make("U", moved), c + shift);
        ASSERT_EQ(a.bits, b.bits);
    }
}

TEST(Window, ActiveDaysBetweenMatchesWindow) {
    Rng rng = make_rng(3, "between");
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::int64_t> offsets;
        for (int k = 0; k < 80; ++k) offsets.push_back(static_cast<std::int64_t>(uniform_index(rng, 400 * kDay)));
        auto log = log_of(offsets);
        Instant c = at(static_cast<std::int64_t>(uniform_index(rng, 400 * kDay)));
        auto w = center_window(log, c);
        int lo = -100 + static_cast<int>(uniform_index(rng, 201));
        int hi = -100 + static_cast<int>(uniform_index(rng, 201));
        ASSERT_EQ(active_days_between(log, c, lo, hi), w.active_between(lo, hi));
    }
}

TEST(Profile, Basics) {
    CenteredWindow a, b;
    a.set(0);
    std::vector<CenteredWindow> ws{a, b};
    auto p = mean_activity_profile(ws);
    ASSERT_EQ(p.size(), static_cast<std::size_t>(kWindowLength));
    EXPECT_DOUBLE_EQ(p[kWindowRadius], 0.5);
    EXPECT_DOUBLE_EQ(p[kWindowRadius + 1], 0.0);

    CenteredWindow c;
    c.set(-3);
    c.set(7);
    std::vector<CenteredWindow> same{c, c, c};
    auto q = mean_activity_profile(same);
    for (int d = -kWindowRadius; d <= kWindowRadius; ++d) EXPECT_EQ(q[d + kWindowRadius], c.active(d) ? 1.0 : 0.0);
    EXPECT_THROW(mean_activity_profile(std::span<const CenteredWindow>{}), DataError);
}

// Oracle: binomial mean and standard deviation.
TEST(Profile, IndependentDailyActivity) {
    Rng rng = make_rng(4, "profile");
    const double q = 0.3;
    const std::size_t n = 4000;
    auto events = bernoulli_events(n, q, q, EventKind::control, rng);
    std::vector<CenteredWindow> ws;
    for (auto& e : events) ws.push_back(e.window);
    auto p = mean_activity_profile(ws);
    const double sigma = std::sqrt(q * (1 - q) / static_cast<double>(n));
    int outside = 0;
    for (double v : p) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        if (std::abs(v - q) > 3 * sigma) ++outside;
    }
    EXPECT_LE(outside, 3);  // ~0.27% of 201 expected
}

TEST(Shuffled, FlatOnPeakedData) {
    // long Poisson histories with a burst of daily activity around a comment
    std::vector<UserRecord> users = poisson_population({.toxic_users = 0, .control_users = 1500, .days = 1500}, 5);
    std::vector<ContributionLog> logs;
    std::vector<CenteredWindow> real;
    Rng rng = make_rng(5, "burst");
    for (auto& u : users) {
        std::vector<Instant> ts = u.log.timestamps;
        Instant comment = u.received.front().time;
        for (int d = -3; d <= 3; ++d) ts.push_back(comment + Seconds{d * kDay + 600});
        logs.push_back(ContributionLog::make(u.log.user, ts));
        real.push_back(center_window(logs.back(), comment));
    }
    auto peaked = mean_activity_profile(real);
    EXPECT_GT(*std::max_element(peaked.begin(), peaked.end()) / median(peaked), 1.5);
    auto flat = shuffled_profile(logs, rng);
    for (double v : flat) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
    EXPECT_LT(*std::max_element(flat.begin(), flat.end()) / median(flat), 1.2);
}

TEST(Shuffled, SingleUserAndDeterminism) {
    auto log = log_of({0, kDay, 10 * kDay, 40 * kDay});
    std::vector<ContributionLog> logs{log};
    Rng r1 = make_rng(6, "shuffle"), r2 = make_rng(6, "shuffle");
    auto a = shuffled_profile(logs, r1);
    auto b = shuffled_profile(logs, r2);
    EXPECT_EQ(a, b);
    for (double v : a) EXPECT_TRUE(v == 0.0 || v == 1.0);
    std::vector<ContributionLog> none;
    EXPECT_THROW(shuffled_profile(none, r1), DataError);
}
