#include "wikitox/leaving.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "wikitox/parallel.hpp"
#include "wikitox/rng.hpp"
#include "wikitox/stats.hpp"

namespace wikitox {

std::vector<LabeledContribution> label_contributions(const ContributionLog& log, std::span<const Instant> toxic_times) {
    std::vector<LabeledContribution> out(log.timestamps.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].index = static_cast<std::uint32_t>(i + 1);
        out[i].timestamp = log.timestamps[i];
        out[i].is_last = i + 1 == out.size();
    }
    for (Instant tau : toxic_times) {
        auto it = std::lower_bound(log.timestamps.begin(), log.timestamps.end(), tau);
        if (it == log.timestamps.begin()) continue;
        out[static_cast<std::size_t>(it - log.timestamps.begin()) - 1].followed_by_toxic = true;
    }
    return out;
}

std::string_view cohort_name(Cohort c) {
    switch (c) {
        case Cohort::toxic_followed: return "toxic_followed";
        case Cohort::other: return "other";
        case Cohort::all: return "all";
    }
    return "";
}

std::vector<CareerSummary> summarize_careers(std::span<const LabeledHistory> histories, int censor_days,
                                             Instant dataset_end) {
    if (censor_days < 0) throw std::invalid_argument("censoring window must be >= 0 days");
    const Instant cutoff = dataset_end - Seconds{std::int64_t{censor_days} * kSecondsPerDay};
    std::vector<CareerSummary> out;
    out.reserve(histories.size());
    for (const auto& h : histories) {
        if (h.contributions.empty()) continue;
        CareerSummary s;
        s.contributions = static_cast<std::uint32_t>(h.contributions.size());
        const auto& last = h.contributions.back();
        s.censored = last.timestamp > cutoff;
        s.last_toxic = last.followed_by_toxic;
        for (const auto& c : h.contributions) {
            if (c.followed_by_toxic && c.index <= static_cast<std::uint32_t>(kMaxRank)) {
                s.toxic_ranks.push_back(static_cast<std::uint16_t>(c.index));
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct Counts {
    std::array<double, kMaxRank> all_exactly{};
    std::array<double, kMaxRank> all_at_least{};
    std::array<double, kMaxRank> toxic_exactly{};
    std::array<double, kMaxRank> toxic_at_least{};
};

// Ranks counted in the denominators for one career.
std::uint32_t denominator_depth(const CareerSummary& s) {
    std::uint32_t depth = s.censored ? s.contributions - 1 : s.contributions;
    return std::min<std::uint32_t>(depth, kMaxRank);
}

Counts count(std::span<const CareerSummary> careers, std::span<const std::uint32_t> weights = {}) {
    Counts c;
    std::array<double, kMaxRank + 1> diff{};
    for (std::size_t i = 0; i < careers.size(); ++i) {
        double w = weights.empty() ? 1.0 : static_cast<double>(weights[i]);
        if (w == 0.0) continue;
        const auto& s = careers[i];
        std::uint32_t depth = denominator_depth(s);
        if (depth > 0) {
            diff[0] += w;
            diff[depth] -= w;
        }
        bool left = !s.censored && s.contributions <= static_cast<std::uint32_t>(kMaxRank);
        if (left) {
            c.all_exactly[s.contributions - 1] += w;
            if (s.last_toxic) c.toxic_exactly[s.contributions - 1] += w;
        }
        for (auto r : s.toxic_ranks) {
            if (r <= depth) c.toxic_at_least[r - 1] += w;
        }
    }
    double running = 0.0;
    for (int n = 0; n < kMaxRank; ++n) {
        running += diff[static_cast<std::size_t>(n)];
        c.all_at_least[static_cast<std::size_t>(n)] = running;
    }
    return c;
}

void fill_cohort(const Counts& c, Cohort cohort, std::array<double, kMaxRank>& exactly,
                 std::array<double, kMaxRank>& at_least) {
    for (std::size_t n = 0; n < kMaxRank; ++n) {
        switch (cohort) {
            case Cohort::all:
                exactly[n] = c.all_exactly[n];
                at_least[n] = c.all_at_least[n];
                break;
            case Cohort::toxic_followed:
                exactly[n] = c.toxic_exactly[n];
                at_least[n] = c.toxic_at_least[n];
                break;
            case Cohort::other:
                exactly[n] = c.all_exactly[n] - c.toxic_exactly[n];
                at_least[n] = c.all_at_least[n] - c.toxic_at_least[n];
                break;
        }
    }
}

}  // namespace

LeaveCurve leave_curve(std::span<const CareerSummary> careers, Cohort cohort) {
    Counts c = count(careers);
    std::array<double, kMaxRank> exactly{}, at_least{};
    fill_cohort(c, cohort, exactly, at_least);
    LeaveCurve curve;
    curve.cohort = cohort;
    for (std::size_t n = 0; n < kMaxRank; ++n) {
        curve.exactly[n] = static_cast<std::uint64_t>(std::llround(exactly[n]));
        curve.at_least[n] = static_cast<std::uint64_t>(std::llround(at_least[n]));
        if (curve.at_least[n] > 0) {
            curve.probability[n] = static_cast<double>(curve.exactly[n]) / static_cast<double>(curve.at_least[n]);
        }
    }
    return curve;
}

LeaveCurve leave_curve(std::span<const LabeledHistory> histories, Cohort cohort, int censor_days, Instant dataset_end) {
    auto careers = summarize_careers(histories, censor_days, dataset_end);
    return leave_curve(careers, cohort);
}

PowerLawFit fit_power_law(std::span<const int> ranks, std::span<const double> probabilities, std::size_t min_points) {
    if (ranks.size() != probabilities.size()) throw std::invalid_argument("rank/probability size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (ranks[i] >= 1 && probabilities[i] > 0.0 && std::isfinite(probabilities[i])) {
            xs.push_back(std::log(static_cast<double>(ranks[i])));
            ys.push_back(std::log(probabilities[i]));
        }
    }
    min_points = std::max<std::size_t>(min_points, 2);
    if (xs.size() < min_points) {
        throw FitError("power-law fit needs at least " + std::to_string(min_points) + " positive points, got " +
                       std::to_string(xs.size()));
    }
    double mx = stats::mean(xs);
    double my = stats::mean(ys);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0.0) throw FitError("power-law fit needs at least two distinct ranks");
    double slope = sxy / sxx;
    PowerLawFit fit;
    fit.alpha = -slope;
    fit.c = std::exp(my - slope * mx);
    fit.points = xs.size();
    return fit;
}

PowerLawFit fit_power_law(const LeaveCurve& curve) {
    std::vector<int> ranks;
    std::vector<double> probs;
    for (int n = 1; n <= kMaxRank; ++n) {
        if (auto p = curve.p(n)) {
            ranks.push_back(n);
            probs.push_back(*p);
        }
    }
    return fit_power_law(ranks, probs);
}

SignificanceReport curve_significance(std::span<const CareerSummary> careers, int resamples, std::uint64_t seed,
                                      double confidence) {
    SignificanceReport report;
    report.confidence = confidence;
    bool any_toxic = std::any_of(careers.begin(), careers.end(),
                                 [](const CareerSummary& s) { return !s.toxic_ranks.empty(); });
    if (!any_toxic || careers.empty() || resamples < 1) return report;

    const auto B = static_cast<std::size_t>(resamples);
    // NaN marks an undefined estimate in a resample.
    std::vector<std::array<double, kMaxRank>> toxic_p(B), other_p(B);
    parallel_for(B, [&](std::size_t b) {
        Rng rng = make_rng(seed, "leave-bootstrap", b);
        std::vector<std::uint32_t> weights(careers.size(), 0);
        for (std::size_t k = 0; k < careers.size(); ++k) ++weights[uniform_index(rng, careers.size())];
        Counts c = count(careers, weights);
        std::array<double, kMaxRank> ex{}, al{};
        fill_cohort(c, Cohort::toxic_followed, ex, al);
        for (std::size_t n = 0; n < kMaxRank; ++n) toxic_p[b][n] = al[n] > 0 ? ex[n] / al[n] : NAN;
        fill_cohort(c, Cohort::other, ex, al);
        for (std::size_t n = 0; n < kMaxRank; ++n) other_p[b][n] = al[n] > 0 ? ex[n] / al[n] : NAN;
    });

    const double alpha = 1.0 - confidence;
    auto interval = [&](const std::vector<std::array<double, kMaxRank>>& samples,
                        std::size_t n) -> std::optional<Interval> {
        std::vector<double> vals;
        vals.reserve(B);
        for (const auto& s : samples) {
            if (!std::isnan(s[n])) vals.push_back(s[n]);
        }
        // undefined in most resamples: no interval
        if (vals.size() * 2 < B) return std::nullopt;
        return Interval{stats::quantile(vals, alpha / 2.0), stats::quantile(vals, 1.0 - alpha / 2.0)};
    };
    for (std::size_t n = 0; n < kMaxRank; ++n) {
        report.toxic_ci[n] = interval(toxic_p, n);
        report.other_ci[n] = interval(other_p, n);
        if (report.toxic_ci[n] && report.other_ci[n]) {
            int rank = static_cast<int>(n + 1);
            report.compared.push_back(rank);
            const auto& t = *report.toxic_ci[n];
            const auto& o = *report.other_ci[n];
            if (t.low > o.high || t.high < o.low) report.disjoint.push_back(rank);
        }
    }
    return report;
}

LeavingAnalysis analyze_leaving(std::span<const ContributionLog> logs, std::span<const ScoredComment> scored,
                                const LeavingConfig& config) {
    std::map<std::string, std::vector<Instant>, std::less<>> toxic_by_user;
    for (const auto& sc : scored) {
        if (is_toxic(sc.scores, config.threshold)) toxic_by_user[sc.comment.recipient].push_back(sc.comment.timestamp);
    }
    for (auto& [user, times] : toxic_by_user) std::sort(times.begin(), times.end());

    LeavingAnalysis out;
    if (config.dataset_end) {
        out.dataset_end = *config.dataset_end;
    } else {
        bool any = false;
        for (const auto& log : logs) {
            if (log.empty()) continue;
            out.dataset_end = any ? std::max(out.dataset_end, log.timestamps.back()) : log.timestamps.back();
            any = true;
        }
    }

    std::vector<LabeledHistory> histories;
    histories.reserve(logs.size());
    static const std::vector<Instant> none;
    for (const auto& log : logs) {
        if (log.empty()) continue;
        auto it = toxic_by_user.find(log.user);
        const auto& times = it == toxic_by_user.end() ? none : it->second;
        histories.push_back(LabeledHistory{log.user, label_contributions(log, times)});
    }
    out.users = histories.size();
    auto careers = summarize_careers(histories, config.censor_days, out.dataset_end);

    out.toxic = leave_curve(careers, Cohort::toxic_followed);
    out.other = leave_curve(careers, Cohort::other);
    out.all = leave_curve(careers, Cohort::all);
    for (LeaveCurve* curve : {&out.toxic, &out.other, &out.all}) {
        try {
            curve->fit = fit_power_law(*curve);
        } catch (const FitError&) {
            curve->fit.reset();
        }
    }
    out.significance = curve_significance(careers, config.bootstrap_resamples, config.seed);
    out.toxic.ci = out.significance.toxic_ci;
    out.other.ci = out.significance.other_ci;
    return out;
}

}  // namespace wikitox
