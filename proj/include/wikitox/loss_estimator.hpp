#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wikitox/activity.hpp"
#include "wikitox/error.hpp"
#include "wikitox/rng.hpp"
#include "wikitox/time.hpp"
#include "wikitox/toxicity.hpp"

namespace wikitox {

// A comment as seen by its recipient: when it arrived and how toxic it was.
struct ReceivedComment {
    Instant time{};
    double max_score = 0.0;
};

struct UserRecord {
    ContributionLog log;
    std::vector<ReceivedComment> received;  // sorted by time

    bool has_toxic(double threshold) const;
    bool has_nontoxic(double threshold) const;
};

struct CohortBuildReport {
    std::size_t users = 0;
    std::size_t recipients_without_contributions = 0;
};

// Joins scored comments with contribution logs by recipient name. Only users with
// at least one received comment and a non-empty log are kept; order is by name.
std::vector<UserRecord> build_user_records(std::span<const ScoredComment> scored,
                                           std::span<const ContributionLog> logs, CohortBuildReport* report = nullptr);

enum class EventKind { toxic, control };

struct EventSample {
    std::uint32_t user = 0;  // index into the UserRecord list
    Instant event_time{};
    EventKind kind = EventKind::toxic;
    CenteredWindow window;  // window.center == event_time
};

struct ToxicEvents {
    std::vector<std::vector<EventSample>> repetitions;
    std::size_t excluded_users = 0;  // no toxic comment at the threshold
};

// Per repetition, one uniformly chosen toxic comment per user. Repetition r draws
// from substream (seed, "pick-toxic", r). Throws DataError("empty toxic cohort").
ToxicEvents pick_toxic_events(std::span<const UserRecord> users, double threshold, std::uint64_t seed,
                              int repetitions = 100);

// Each contribution independently spawns a virtual event with probability p; one
// spawned event is returned (chosen uniformly) or nullopt when none spawned. The
// event is placed `offset` after its contribution.
std::optional<Instant> virtual_toxic_events(const ContributionLog& log, double p, Rng& rng,
                                            Seconds offset = Seconds{1});

enum class CenterOn { virtual_event, nearest_nontoxic_comment };

struct ControlPoolOptions {
    CenterOn center_on = CenterOn::virtual_event;
    bool excludes_toxic_recipients = true;
    Seconds virtual_offset{1};
    DaySplit split{};
};

// Control candidates: users with a non-toxic comment (and, by default, no toxic one).
class ControlPool {
public:
    ControlPool(std::span<const UserRecord> users, double threshold, ControlPoolOptions options = {});

    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    std::span<const std::uint32_t> members() const { return members_; }

    // Expected pre-window active days of the control cohort drawn with probability p:
    // sum_i pi_i(p) m_i / sum_i pi_i(p), pi_i(p) = 1 - (1 - p)^{n_i}, where m_i is user i's
    // pre-window activity averaged over the contributions an event may follow.
    double expected_pre_mean(double p) const;

    // One control cohort drawn from substream (seed, "virtual", rep), members in order.
    std::vector<EventSample> draw(double p, std::uint64_t seed, int rep) const;

    const ControlPoolOptions& options() const { return options_; }

private:
    Instant center_for(std::uint32_t user, Instant virtual_event) const;

    std::span<const UserRecord> users_;
    double threshold_;
    ControlPoolOptions options_;
    std::vector<std::uint32_t> members_;
    std::vector<double> member_pre_mean_;
    std::vector<std::size_t> member_contributions_;
};

struct CalibrationOptions {
    double tolerance = 0.1;  // active days
    double p_min = 1e-6;
    double p_max = 1.0;
    double p_tolerance = 1e-12;
    int max_steps = 200;
};

struct CalibrationResult {
    double p = 1.0;
    double target = 0.0;
    double achieved = 0.0;
    int steps = 0;
};

class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, double at_min, double at_max)
        : Error(what), at_min_(at_min), at_max_(at_max) {}
    double value_at_min() const { return at_min_; }
    double value_at_max() const { return at_max_; }

private:
    double at_min_;
    double at_max_;
};

// Bisection on p in [p_min, p_max] for expected_pre_mean(p) == target. The objective
// is monotone in p; its direction is read off the bracket ends.
CalibrationResult calibrate_p(double target_pre_mean, const ControlPool& pool, const CalibrationOptions& options = {});

// Mean pre-window active days over all events of all repetitions.
double mean_pre_activity(std::span<const std::vector<EventSample>> repetitions, const DaySplit& split = {});

struct DeltaEstimate {
    double delta = 0.0;
    double p_value = 1.0;
    std::size_t n_toxic = 0;
    std::size_t n_control = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;

    double toxic_before = 0.0;
    double toxic_after = 0.0;
    double control_before = 0.0;
    double control_after = 0.0;
};

struct DeltaOptions {
    int bootstrap_resamples = 1000;
    double confidence = 0.95;
    std::uint64_t seed = 0;
    DaySplit split{};
};

// Per-user score after - before, one vector per repetition.
using RepScores = std::vector<std::vector<std::int16_t>>;

RepScores event_scores(std::span<const std::vector<EventSample>> repetitions, const DaySplit& split = {});

// Difference-in-differences over repetitions: delta is the mean of per-repetition
// deltas, p_value the median of per-repetition Welch p-values, the CI a percentile
// interval over B resamples pooled across repetitions (resample b uses repetition b mod R).
DeltaEstimate delta(const RepScores& toxic, const RepScores& control, const DeltaOptions& options = {});
DeltaEstimate delta(std::span<const EventSample> toxic, std::span<const EventSample> control,
                    const DeltaOptions& options = {});

double total_loss_human_years(double delta, std::size_t n_users);

struct LossConfig {
    double threshold = 0.8;
    int repetitions = 100;
    std::uint64_t seed = 42;
    ControlPoolOptions control{};
    CalibrationOptions calibration{};
    int bootstrap_resamples = 1000;
};

struct LossAnalysis {
    DeltaEstimate estimate;
    CalibrationResult calibration;
    double toxic_pre_mean = 0.0;
    double control_pre_mean = 0.0;  // realized over drawn cohorts
    bool matching_within_tolerance = true;
    std::size_t toxic_users = 0;
    std::size_t excluded_users = 0;
    std::size_t control_pool = 0;
    std::vector<double> toxic_profile;
    std::vector<double> control_profile;
    std::vector<double> shuffled_profile;
};

// The full matched-control estimate at one threshold.
LossAnalysis analyze_loss(std::span<const UserRecord> users, const LossConfig& config);

struct SweepCell {
    double threshold = 0.0;
    int min_active_days = 0;
    std::optional<DeltaEstimate> estimate;  // absent when a cohort is empty
    std::string note;
};

struct SweepGrid {
    std::vector<double> thresholds;
    std::vector<int> activity_filters;
    std::vector<SweepCell> cells;  // threshold-major

    const SweepCell& at(std::size_t ti, std::size_t xi) const { return cells[ti * activity_filters.size() + xi]; }
};

std::vector<double> default_sweep_thresholds();  // 0.2, 0.3, ..., 0.9
std::vector<int> default_activity_filters();     // 0, 10, ..., 50

// One estimate per (threshold, X); X keeps events whose pre-window has at least X
// active days, in both cohorts. Cells share events across X, so cohorts are nested
// and X = 0 equals analyze_loss at that threshold.
SweepGrid robustness_sweep(std::span<const UserRecord> users, std::span<const double> thresholds,
                           std::span<const int> activity_filters, const LossConfig& config);

}  // namespace wikitox
