#pragma once

#include <bitset>
#include <span>
#include <string>
#include <vector>

#include "wikitox/rng.hpp"
#include "wikitox/time.hpp"

namespace wikitox {

// All edits of one user anywhere on the wiki, sorted ascending with duplicates collapsed.
struct ContributionLog {
    std::string user;
    std::vector<Instant> timestamps;

    static ContributionLog make(std::string user, std::vector<Instant> timestamps);
    bool empty() const { return timestamps.empty(); }
};

// Day d (1-based) covers [origin + (d-1) days, origin + d days), origin = first edit.
struct ActivityVector {
    std::string user;
    Instant origin{};
    std::vector<bool> days;

    std::size_t active_days() const;
};

inline constexpr int kWindowRadius = 100;
inline constexpr int kWindowLength = 2 * kWindowRadius + 1;

// Which day offsets count as "before" and "after" an event. Day 0 starts at the event.
struct DaySplit {
    int before_first = -kWindowRadius;
    int before_last = -1;
    int after_first = 0;
    int after_last = kWindowRadius - 1;

    static DaySplit day0_after() { return {}; }
    // Leaves day 0 out and uses 100 days on each side.
    static DaySplit symmetric() { return {-kWindowRadius, -1, 1, kWindowRadius}; }
};

// Activity in the 201 days d in [-100, 100] around an instant; bit d is set when at
// least one edit falls in [center + d days, center + (d + 1) days).
struct CenteredWindow {
    std::string user;
    Instant center{};
    std::bitset<kWindowLength> bits;

    bool active(int d) const { return bits.test(static_cast<std::size_t>(d + kWindowRadius)); }
    void set(int d) { bits.set(static_cast<std::size_t>(d + kWindowRadius)); }
    // Number of active days with offsets in [first, last].
    int active_between(int first, int last) const;
    int before(const DaySplit& split = {}) const { return active_between(split.before_first, split.before_last); }
    int after(const DaySplit& split = {}) const { return active_between(split.after_first, split.after_last); }
};

// Throws DataError("no contributions") for an empty log.
ActivityVector to_active_days(const ContributionLog& log);

CenteredWindow center_window(const ContributionLog& log, Instant center);

// Same count as center_window(log, center).active_between(first, last), without
// building the window.
int active_days_between(const ContributionLog& log, Instant center, int first, int last);

// Fraction of windows active at each offset, indexed d + 100.
std::vector<double> mean_activity_profile(std::span<const CenteredWindow> windows);

// Profile around centers drawn uniformly from each user's own observation range
// [first edit, last edit]; the control for a peak that is caused by centering itself.
std::vector<double> shuffled_profile(std::span<const ContributionLog> logs, Rng& rng);

}  // namespace wikitox
