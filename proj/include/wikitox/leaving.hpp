#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wikitox/activity.hpp"
#include "wikitox/time.hpp"
#include "wikitox/toxicity.hpp"

namespace wikitox {

inline constexpr int kMaxRank = 100;

struct LabeledContribution {
    std::uint32_t index = 0;  // 1-based rank in the user's history
    Instant timestamp{};
    bool followed_by_toxic = false;
    bool is_last = false;
};

struct LabeledHistory {
    std::string user;
    std::vector<LabeledContribution> contributions;
};

// Each toxic comment labels the latest contribution strictly before it.
std::vector<LabeledContribution> label_contributions(const ContributionLog& log, std::span<const Instant> toxic_times);

enum class Cohort { toxic_followed, other, all };
std::string_view cohort_name(Cohort c);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

struct PowerLawFit {
    double alpha = 0.0;
    double c = 0.0;
    std::size_t points = 0;
};

struct LeaveCurve {
    Cohort cohort = Cohort::all;
    // Indexed N - 1 for N in [1, 100].
    std::array<std::uint64_t, kMaxRank> exactly{};
    std::array<std::uint64_t, kMaxRank> at_least{};
    std::array<std::optional<double>, kMaxRank> probability{};
    std::optional<PowerLawFit> fit;
    std::array<std::optional<Interval>, kMaxRank> ci{};

    std::optional<double> p(int n) const { return probability[static_cast<std::size_t>(n - 1)]; }
};

// Per-user compact view of a career used for counting and resampling.
struct CareerSummary {
    std::uint32_t contributions = 0;
    bool censored = false;                  // last edit within the censoring window
    std::vector<std::uint16_t> toxic_ranks;  // labeled ranks <= 100, ascending, unique
    bool last_toxic = false;
};

std::vector<CareerSummary> summarize_careers(std::span<const LabeledHistory> histories, int censor_days,
                                             Instant dataset_end);

// A user leaves at N when N is their last contribution and it lies at least W days
// before the end of the data. Censored users stay in the denominators below their
// last contribution only.
LeaveCurve leave_curve(std::span<const CareerSummary> careers, Cohort cohort);
LeaveCurve leave_curve(std::span<const LabeledHistory> histories, Cohort cohort, int censor_days, Instant dataset_end);

class FitError : public Error {
public:
    using Error::Error;
};

// OLS of log P on log N over defined, positive points: alpha = -slope, c = exp(intercept).
PowerLawFit fit_power_law(const LeaveCurve& curve);
// min_points below 2 is raised to 2; two points give the line through both.
PowerLawFit fit_power_law(std::span<const int> ranks, std::span<const double> probabilities,
                          std::size_t min_points = 3);

struct SignificanceReport {
    std::array<std::optional<Interval>, kMaxRank> toxic_ci{};
    std::array<std::optional<Interval>, kMaxRank> other_ci{};
    std::vector<int> disjoint;  // ranks whose intervals do not intersect
    std::vector<int> compared;  // ranks where both intervals exist
    double confidence = 0.95;
    // Two independent intervals missing each other: both tails at once.
    double p_bound() const { return ((1.0 - confidence) / 2.0) * ((1.0 - confidence) / 2.0); }
};

// Percentile bootstrap over users (resample b uses substream (seed, "leave-bootstrap", b)).
SignificanceReport curve_significance(std::span<const CareerSummary> careers, int resamples, std::uint64_t seed,
                                      double confidence = 0.95);

struct LeavingConfig {
    double threshold = 0.8;
    int censor_days = 100;
    std::optional<Instant> dataset_end;  // default: latest observed edit
    int bootstrap_resamples = 1000;
    std::uint64_t seed = 42;
};

struct LeavingAnalysis {
    LeaveCurve toxic;
    LeaveCurve other;
    LeaveCurve all;
    SignificanceReport significance;
    Instant dataset_end{};
    std::size_t users = 0;
};

// toxic_times: per-recipient toxic comment instants are gathered from `scored`.
LeavingAnalysis analyze_leaving(std::span<const ContributionLog> logs, std::span<const ScoredComment> scored,
                                const LeavingConfig& config);

}  // namespace wikitox
