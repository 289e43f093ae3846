#include "wikitox/activity.hpp"

#include <algorithm>
#include <limits>

#include "wikitox/error.hpp"

namespace wikitox {

ContributionLog ContributionLog::make(std::string user, std::vector<Instant> timestamps) {
    std::sort(timestamps.begin(), timestamps.end());
    timestamps.erase(std::unique(timestamps.begin(), timestamps.end()), timestamps.end());
    return ContributionLog{std::move(user), std::move(timestamps)};
}

std::size_t ActivityVector::active_days() const { return static_cast<std::size_t>(std::count(days.begin(), days.end(), true)); }

int CenteredWindow::active_between(int first, int last) const {
    first = std::max(first, -kWindowRadius);
    last = std::min(last, kWindowRadius);
    int n = 0;
    for (int d = first; d <= last; ++d) n += active(d) ? 1 : 0;
    return n;
}

ActivityVector to_active_days(const ContributionLog& log) {
    if (log.timestamps.empty()) throw DataError("no contributions for user '" + log.user + "'");
    ActivityVector v;
    v.user = log.user;
    v.origin = log.timestamps.front();
    auto offset_days = [&](Instant t) {
        return static_cast<std::size_t>((epoch_seconds(t) - epoch_seconds(v.origin)) / kSecondsPerDay);
    };
    v.days.assign(offset_days(log.timestamps.back()) + 1, false);
    for (Instant t : log.timestamps) v.days[offset_days(t)] = true;
    return v;
}

CenteredWindow center_window(const ContributionLog& log, Instant center) {
    CenteredWindow w;
    w.user = log.user;
    w.center = center;
    const std::int64_t c = epoch_seconds(center);
    const Instant lo = instant_from_epoch(c - std::int64_t{kWindowRadius} * kSecondsPerDay);
    const Instant hi = instant_from_epoch(c + std::int64_t{kWindowRadius + 1} * kSecondsPerDay);
    auto it = std::lower_bound(log.timestamps.begin(), log.timestamps.end(), lo);
    for (; it != log.timestamps.end() && *it < hi; ++it) {
        std::int64_t delta = epoch_seconds(*it) - c;
        // floor division: -1 s lands in day -1
        std::int64_t d = delta >= 0 ? delta / kSecondsPerDay : -((-delta + kSecondsPerDay - 1) / kSecondsPerDay);
        w.set(static_cast<int>(d));
    }
    return w;
}

int active_days_between(const ContributionLog& log, Instant center, int first, int last) {
    if (first > last) return 0;
    const std::int64_t c = epoch_seconds(center);
    const Instant lo = instant_from_epoch(c + std::int64_t{first} * kSecondsPerDay);
    const Instant hi = instant_from_epoch(c + (std::int64_t{last} + 1) * kSecondsPerDay);
    int count = 0;
    std::int64_t previous_day = std::numeric_limits<std::int64_t>::min();
    for (auto it = std::lower_bound(log.timestamps.begin(), log.timestamps.end(), lo);
         it != log.timestamps.end() && *it < hi; ++it) {
        std::int64_t delta = epoch_seconds(*it) - c;
        std::int64_t d = delta >= 0 ? delta / kSecondsPerDay : -((-delta + kSecondsPerDay - 1) / kSecondsPerDay);
        if (d != previous_day) {
            ++count;
            previous_day = d;
        }
    }
    return count;
}

std::vector<double> mean_activity_profile(std::span<const CenteredWindow> windows) {
    if (windows.empty()) throw DataError("activity profile of an empty cohort");
    std::vector<double> profile(kWindowLength, 0.0);
    for (const auto& w : windows) {
        for (std::size_t i = 0; i < kWindowLength; ++i) profile[i] += w.bits.test(i) ? 1.0 : 0.0;
    }
    for (double& p : profile) p /= static_cast<double>(windows.size());
    return profile;
}

std::vector<double> shuffled_profile(std::span<const ContributionLog> logs, Rng& rng) {
    std::vector<CenteredWindow> windows;
    windows.reserve(logs.size());
    for (const auto& log : logs) {
        if (log.empty()) continue;
        std::int64_t first = epoch_seconds(log.timestamps.front());
        std::int64_t span = epoch_seconds(log.timestamps.back()) - first;
        auto offset = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(span) + 1));
        windows.push_back(center_window(log, instant_from_epoch(first + offset)));
    }
    if (windows.empty()) throw DataError("shuffled profile needs at least one user with contributions");
    return mean_activity_profile(windows);
}

}  // namespace wikitox
