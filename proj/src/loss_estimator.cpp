#include "wikitox/loss_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "wikitox/parallel.hpp"
#include "wikitox/stats.hpp"

namespace wikitox {

bool UserRecord::has_toxic(double threshold) const {
    return std::any_of(received.begin(), received.end(),
                       [&](const ReceivedComment& c) { return c.max_score >= threshold; });
}

bool UserRecord::has_nontoxic(double threshold) const {
    return std::any_of(received.begin(), received.end(),
                       [&](const ReceivedComment& c) { return c.max_score < threshold; });
}

std::vector<UserRecord> build_user_records(std::span<const ScoredComment> scored,
                                           std::span<const ContributionLog> logs, CohortBuildReport* report) {
    std::map<std::string, std::vector<ReceivedComment>, std::less<>> by_recipient;
    for (const auto& sc : scored) {
        by_recipient[sc.comment.recipient].push_back(ReceivedComment{sc.comment.timestamp, sc.scores.max()});
    }
    std::map<std::string_view, const ContributionLog*> by_user;
    for (const auto& log : logs) by_user[log.user] = &log;

    std::vector<UserRecord> users;
    CohortBuildReport r;
    for (auto& [name, received] : by_recipient) {
        auto it = by_user.find(name);
        if (it == by_user.end() || it->second->empty()) {
            ++r.recipients_without_contributions;
            continue;
        }
        std::stable_sort(received.begin(), received.end(),
                         [](const ReceivedComment& a, const ReceivedComment& b) { return a.time < b.time; });
        users.push_back(UserRecord{*it->second, std::move(received)});
    }
    r.users = users.size();
    if (report) *report = r;
    return users;
}

namespace {

std::vector<std::vector<Instant>> toxic_times(std::span<const UserRecord> users, double threshold) {
    std::vector<std::vector<Instant>> out(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
        for (const auto& c : users[i].received) {
            if (c.max_score >= threshold) out[i].push_back(c.time);
        }
    }
    return out;
}

std::vector<EventSample> pick_one_repetition(std::span<const UserRecord> users,
                                             const std::vector<std::vector<Instant>>& toxic, std::uint64_t seed,
                                             int rep) {
    Rng rng = make_rng(seed, "pick-toxic", static_cast<std::uint64_t>(rep));
    std::vector<EventSample> events;
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (toxic[i].empty()) continue;
        Instant t = toxic[i][uniform_index(rng, toxic[i].size())];
        events.push_back(EventSample{static_cast<std::uint32_t>(i), t, EventKind::toxic,
                                     center_window(users[i].log, t)});
    }
    return events;
}

}  // namespace

ToxicEvents pick_toxic_events(std::span<const UserRecord> users, double threshold, std::uint64_t seed,
                              int repetitions) {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    auto toxic = toxic_times(users, threshold);
    ToxicEvents out;
    out.excluded_users = static_cast<std::size_t>(
        std::count_if(toxic.begin(), toxic.end(), [](const auto& v) { return v.empty(); }));
    if (out.excluded_users == users.size()) throw DataError("empty toxic cohort");
    out.repetitions.resize(static_cast<std::size_t>(repetitions));
    parallel_for(out.repetitions.size(), [&](std::size_t r) {
        out.repetitions[r] = pick_one_repetition(users, toxic, seed, static_cast<int>(r));
    });
    return out;
}

std::optional<Instant> virtual_toxic_events(const ContributionLog& log, double p, Rng& rng, Seconds offset) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("virtual event probability must be in (0,1]");
    std::optional<Instant> chosen;
    std::uint64_t spawned = 0;
    for (Instant t : log.timestamps) {
        if (!bernoulli(rng, p)) continue;
        // reservoir sampling of size one keeps the choice uniform among spawned events
        ++spawned;
        if (uniform_index(rng, spawned) == 0) chosen = t + offset;
    }
    return chosen;
}

ControlPool::ControlPool(std::span<const UserRecord> users, double threshold, ControlPoolOptions options)
    : users_(users), threshold_(threshold), options_(options) {
    for (std::size_t i = 0; i < users.size(); ++i) {
        const auto& u = users[i];
        if (u.log.empty() || !u.has_nontoxic(threshold)) continue;
        if (options_.excludes_toxic_recipients && u.has_toxic(threshold)) continue;
        members_.push_back(static_cast<std::uint32_t>(i));
    }
    member_pre_mean_.resize(members_.size());
    member_contributions_.resize(members_.size());
    parallel_for(members_.size(), [&](std::size_t k) {
        std::uint32_t i = members_[k];
        const auto& log = users_[i].log;
        double sum = 0.0;
        for (Instant t : log.timestamps) {
            sum += active_days_between(log, center_for(i, t + options_.virtual_offset), options_.split.before_first,
                                       options_.split.before_last);
        }
        member_pre_mean_[k] = sum / static_cast<double>(log.timestamps.size());
        member_contributions_[k] = log.timestamps.size();
    });
}

Instant ControlPool::center_for(std::uint32_t user, Instant virtual_event) const {
    if (options_.center_on == CenterOn::virtual_event) return virtual_event;
    const auto& received = users_[user].received;
    std::optional<Instant> best;
    std::int64_t best_gap = 0;
    for (const auto& c : received) {
        if (c.max_score >= threshold_) continue;
        std::int64_t gap = std::llabs(epoch_seconds(c.time) - epoch_seconds(virtual_event));
        if (!best || gap < best_gap) {
            best = c.time;
            best_gap = gap;
        }
    }
    return best.value_or(virtual_event);
}

double ControlPool::expected_pre_mean(double p) const {
    if (members_.empty()) throw DataError("empty control pool");
    double num = 0.0;
    double den = 0.0;
    const double log_q = p >= 1.0 ? -INFINITY : std::log1p(-p);
    for (std::size_t k = 0; k < members_.size(); ++k) {
        double n = static_cast<double>(member_contributions_[k]);
        double inclusion = p >= 1.0 ? 1.0 : -std::expm1(n * log_q);
        num += inclusion * member_pre_mean_[k];
        den += inclusion;
    }
    return den > 0.0 ? num / den : 0.0;
}

std::vector<EventSample> ControlPool::draw(double p, std::uint64_t seed, int rep) const {
    Rng rng = make_rng(seed, "virtual", static_cast<std::uint64_t>(rep));
    std::vector<EventSample> events;
    for (std::uint32_t i : members_) {
        auto event = virtual_toxic_events(users_[i].log, p, rng, options_.virtual_offset);
        if (!event) continue;
        Instant center = center_for(i, *event);
        events.push_back(EventSample{i, center, EventKind::control, center_window(users_[i].log, center)});
    }
    return events;
}

CalibrationResult calibrate_p(double target, const ControlPool& pool, const CalibrationOptions& options) {
    if (pool.empty()) throw DataError("empty control pool");
    CalibrationResult r;
    r.target = target;
    double lo = options.p_min;
    double hi = options.p_max;
    double f_lo = pool.expected_pre_mean(lo);
    double f_hi = pool.expected_pre_mean(hi);
    if (std::fabs(f_hi - target) <= options.tolerance) {
        r.p = hi;
        r.achieved = f_hi;
        return r;
    }
    if (std::fabs(f_lo - target) <= options.tolerance) {
        r.p = lo;
        r.achieved = f_lo;
        return r;
    }
    if (target < std::min(f_lo, f_hi) || target > std::max(f_lo, f_hi)) {
        throw CalibrationError("matching target " + std::to_string(target) +
                                   " active days is outside the reachable range [" +
                                   std::to_string(std::min(f_lo, f_hi)) + ", " + std::to_string(std::max(f_lo, f_hi)) +
                                   "] (p=" + std::to_string(lo) + " gives " + std::to_string(f_lo) +
                                   ", p=" + std::to_string(hi) + " gives " + std::to_string(f_hi) + ")",
                               f_lo, f_hi);
    }
    const bool increasing = f_hi > f_lo;
    double mid = 0.5 * (lo + hi);
    double f_mid = f_lo;
    while (r.steps < options.max_steps) {
        mid = 0.5 * (lo + hi);
        f_mid = pool.expected_pre_mean(mid);
        ++r.steps;
        if (std::fabs(f_mid - target) <= options.tolerance || hi - lo <= options.p_tolerance) break;
        if ((f_mid < target) == increasing) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    r.p = mid;
    r.achieved = f_mid;
    return r;
}

double mean_pre_activity(std::span<const std::vector<EventSample>> repetitions, const DaySplit& split) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& rep : repetitions) {
        for (const auto& e : rep) {
            sum += e.window.before(split);
            ++n;
        }
    }
    if (n == 0) throw DataError("no events");
    return sum / static_cast<double>(n);
}

namespace {

struct EventScore {
    std::int16_t before;
    std::int16_t after;
};

using GroupReps = std::vector<std::vector<EventScore>>;

GroupReps to_scores(std::span<const std::vector<EventSample>> reps, const DaySplit& split) {
    GroupReps out(reps.size());
    for (std::size_t r = 0; r < reps.size(); ++r) {
        out[r].reserve(reps[r].size());
        for (const auto& e : reps[r]) {
            out[r].push_back(EventScore{static_cast<std::int16_t>(e.window.before(split)),
                                        static_cast<std::int16_t>(e.window.after(split))});
        }
    }
    return out;
}

DeltaEstimate delta_core(const GroupReps& toxic, const GroupReps& control, const DeltaOptions& options) {
    if (toxic.empty() || toxic.size() != control.size()) {
        throw std::invalid_argument("delta needs the same positive number of repetitions in both groups");
    }
    const std::size_t reps = toxic.size();
    DeltaEstimate est;
    std::vector<double> deltas, pvalues;
    double n_control_sum = 0.0;
    double n_toxic_sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        if (toxic[r].empty() || control[r].empty()) throw DataError("delta needs non-empty toxic and control groups");
        std::vector<double> ts, cs;
        ts.reserve(toxic[r].size());
        cs.reserve(control[r].size());
        double tb = 0, ta = 0, cb = 0, ca = 0;
        for (auto s : toxic[r]) {
            ts.push_back(s.after - s.before);
            tb += s.before;
            ta += s.after;
        }
        for (auto s : control[r]) {
            cs.push_back(s.after - s.before);
            cb += s.before;
            ca += s.after;
        }
        auto nt = static_cast<double>(ts.size());
        auto nc = static_cast<double>(cs.size());
        est.toxic_before += tb / nt;
        est.toxic_after += ta / nt;
        est.control_before += cb / nc;
        est.control_after += ca / nc;
        deltas.push_back(stats::mean(ts) - stats::mean(cs));
        pvalues.push_back(stats::welch_t_test(ts, cs).p_value);
        n_control_sum += nc;
        n_toxic_sum += nt;
    }
    const auto R = static_cast<double>(reps);
    est.toxic_before /= R;
    est.toxic_after /= R;
    est.control_before /= R;
    est.control_after /= R;
    est.delta = stats::mean(deltas);
    est.p_value = stats::quantile(pvalues, 0.5);
    est.n_toxic = static_cast<std::size_t>(std::llround(n_toxic_sum / R));
    est.n_control = static_cast<std::size_t>(std::llround(n_control_sum / R));

    const int B = options.bootstrap_resamples;
    if (B > 0) {
        std::vector<double> boot(static_cast<std::size_t>(B));
        parallel_for(boot.size(), [&](std::size_t b) {
            Rng rng = make_rng(options.seed, "bootstrap", b);
            const auto& t = toxic[b % reps];
            const auto& c = control[b % reps];
            long long st = 0, sc = 0;
            for (std::size_t k = 0; k < t.size(); ++k) {
                const auto& s = t[uniform_index(rng, t.size())];
                st += s.after - s.before;
            }
            for (std::size_t k = 0; k < c.size(); ++k) {
                const auto& s = c[uniform_index(rng, c.size())];
                sc += s.after - s.before;
            }
            boot[b] = static_cast<double>(st) / static_cast<double>(t.size()) -
                      static_cast<double>(sc) / static_cast<double>(c.size());
        });
        double alpha = 1.0 - options.confidence;
        est.ci_low = std::min(stats::quantile(boot, alpha / 2.0), est.delta);
        est.ci_high = std::max(stats::quantile(boot, 1.0 - alpha / 2.0), est.delta);
    } else {
        est.ci_low = est.ci_high = est.delta;
    }
    return est;
}

}  // namespace

RepScores event_scores(std::span<const std::vector<EventSample>> repetitions, const DaySplit& split) {
    RepScores out(repetitions.size());
    for (std::size_t r = 0; r < repetitions.size(); ++r) {
        for (const auto& e : repetitions[r]) {
            out[r].push_back(static_cast<std::int16_t>(e.window.after(split) - e.window.before(split)));
        }
    }
    return out;
}

DeltaEstimate delta(const RepScores& toxic, const RepScores& control, const DeltaOptions& options) {
    // Scores carry no split of their own; encode them as (before = 0, after = score).
    auto lift = [](const RepScores& in) {
        GroupReps out(in.size());
        for (std::size_t r = 0; r < in.size(); ++r) {
            for (auto s : in[r]) out[r].push_back(EventScore{0, s});
        }
        return out;
    };
    DeltaEstimate est = delta_core(lift(toxic), lift(control), options);
    est.toxic_before = est.toxic_after = est.control_before = est.control_after = 0.0;
    return est;
}

DeltaEstimate delta(std::span<const EventSample> toxic, std::span<const EventSample> control,
                    const DeltaOptions& options) {
    std::vector<std::vector<EventSample>> t{std::vector<EventSample>(toxic.begin(), toxic.end())};
    std::vector<std::vector<EventSample>> c{std::vector<EventSample>(control.begin(), control.end())};
    return delta_core(to_scores(t, options.split), to_scores(c, options.split), options);
}

double total_loss_human_years(double delta, std::size_t n_users) {
    return std::fabs(delta) * static_cast<double>(n_users) / 365.25;
}

namespace {

// Everything computed once per threshold; activity filters only subset it.
struct ThresholdPass {
    std::uint64_t seed = 0;
    GroupReps toxic;
    GroupReps control;
    CalibrationResult calibration;
    double toxic_pre_mean = 0.0;
    double control_pre_mean = 0.0;
    std::size_t toxic_users = 0;
    std::size_t excluded_users = 0;
    std::size_t control_pool = 0;
    std::vector<double> toxic_profile;
    std::vector<double> control_profile;
    std::vector<double> shuffled_profile;
};

std::uint64_t threshold_seed(std::uint64_t seed, double threshold) {
    return substream_seed(seed, "threshold", static_cast<std::uint64_t>(std::llround(threshold * 1000.0)));
}

void accumulate_profile(std::vector<double>& acc, const std::vector<EventSample>& events) {
    if (events.empty()) return;
    std::vector<CenteredWindow> windows;
    windows.reserve(events.size());
    for (const auto& e : events) windows.push_back(e.window);
    auto p = mean_activity_profile(windows);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p[i];
}

ThresholdPass run_threshold(std::span<const UserRecord> users, double threshold, const LossConfig& config) {
    if (config.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    ThresholdPass pass;
    pass.seed = threshold_seed(config.seed, threshold);
    const auto reps = static_cast<std::size_t>(config.repetitions);
    const DaySplit& split = config.control.split;

    auto toxic = toxic_times(users, threshold);
    pass.excluded_users = static_cast<std::size_t>(
        std::count_if(toxic.begin(), toxic.end(), [](const auto& v) { return v.empty(); }));
    pass.toxic_users = users.size() - pass.excluded_users;
    if (pass.toxic_users == 0) throw DataError("empty toxic cohort");

    pass.toxic.resize(reps);
    pass.toxic_profile.assign(kWindowLength, 0.0);
    std::vector<std::vector<double>> toxic_profiles(reps, std::vector<double>(kWindowLength, 0.0));
    std::vector<double> toxic_pre(reps, 0.0);
    parallel_for(reps, [&](std::size_t r) {
        auto events = pick_one_repetition(users, toxic, pass.seed, static_cast<int>(r));
        std::vector<std::vector<EventSample>> one{std::move(events)};
        pass.toxic[r] = to_scores(one, split)[0];
        toxic_pre[r] = mean_pre_activity(one, split);
        accumulate_profile(toxic_profiles[r], one[0]);
    });
    pass.toxic_pre_mean = std::accumulate(toxic_pre.begin(), toxic_pre.end(), 0.0) / static_cast<double>(reps);
    for (const auto& p : toxic_profiles) {
        for (std::size_t i = 0; i < kWindowLength; ++i) pass.toxic_profile[i] += p[i] / static_cast<double>(reps);
    }

    ControlPool pool(users, threshold, config.control);
    pass.control_pool = pool.size();
    if (pool.empty()) throw DataError("empty control pool");
    pass.calibration = calibrate_p(pass.toxic_pre_mean, pool, config.calibration);

    pass.control.resize(reps);
    std::vector<std::vector<double>> control_profiles(reps, std::vector<double>(kWindowLength, 0.0));
    std::vector<double> control_pre_sum(reps, 0.0);
    parallel_for(reps, [&](std::size_t r) {
        auto events = pool.draw(pass.calibration.p, pass.seed, static_cast<int>(r));
        if (events.empty()) return;
        std::vector<std::vector<EventSample>> one{std::move(events)};
        pass.control[r] = to_scores(one, split)[0];
        for (const auto& s : pass.control[r]) control_pre_sum[r] += s.before;
        accumulate_profile(control_profiles[r], one[0]);
    });
    std::size_t control_events = 0;
    for (const auto& c : pass.control) {
        if (c.empty()) throw DataError("empty control cohort (no virtual events drawn)");
        control_events += c.size();
    }
    pass.control_pre_mean =
        std::accumulate(control_pre_sum.begin(), control_pre_sum.end(), 0.0) / static_cast<double>(control_events);
    pass.control_profile.assign(kWindowLength, 0.0);
    for (const auto& p : control_profiles) {
        for (std::size_t i = 0; i < kWindowLength; ++i) pass.control_profile[i] += p[i] / static_cast<double>(reps);
    }

    std::vector<ContributionLog> toxic_logs;
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (!toxic[i].empty()) toxic_logs.push_back(users[i].log);
    }
    Rng shuffle_rng = make_rng(pass.seed, "shuffle");
    pass.shuffled_profile = wikitox::shuffled_profile(toxic_logs, shuffle_rng);
    return pass;
}

GroupReps filter_by_pre(const GroupReps& in, int min_active_days) {
    GroupReps out(in.size());
    for (std::size_t r = 0; r < in.size(); ++r) {
        for (auto s : in[r]) {
            if (s.before >= min_active_days) out[r].push_back(s);
        }
    }
    return out;
}

DeltaOptions cell_options(const ThresholdPass& pass, const LossConfig& config, int min_active_days) {
    DeltaOptions opts;
    opts.bootstrap_resamples = config.bootstrap_resamples;
    opts.seed = substream_seed(pass.seed, "bootstrap-filter", static_cast<std::uint64_t>(min_active_days));
    opts.split = config.control.split;
    return opts;
}

}  // namespace

LossAnalysis analyze_loss(std::span<const UserRecord> users, const LossConfig& config) {
    ThresholdPass pass = run_threshold(users, config.threshold, config);
    LossAnalysis out;
    out.estimate = delta_core(pass.toxic, pass.control, cell_options(pass, config, 0));
    out.calibration = pass.calibration;
    out.toxic_pre_mean = pass.toxic_pre_mean;
    out.control_pre_mean = pass.control_pre_mean;
    out.matching_within_tolerance =
        std::fabs(pass.control_pre_mean - pass.toxic_pre_mean) <= config.calibration.tolerance;
    out.toxic_users = pass.toxic_users;
    out.excluded_users = pass.excluded_users;
    out.control_pool = pass.control_pool;
    out.toxic_profile = std::move(pass.toxic_profile);
    out.control_profile = std::move(pass.control_profile);
    out.shuffled_profile = std::move(pass.shuffled_profile);
    return out;
}

std::vector<double> default_sweep_thresholds() { return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }
std::vector<int> default_activity_filters() { return {0, 10, 20, 30, 40, 50}; }

SweepGrid robustness_sweep(std::span<const UserRecord> users, std::span<const double> thresholds,
                           std::span<const int> activity_filters, const LossConfig& config) {
    SweepGrid grid;
    grid.thresholds.assign(thresholds.begin(), thresholds.end());
    grid.activity_filters.assign(activity_filters.begin(), activity_filters.end());
    for (double tau : thresholds) {
        std::optional<ThresholdPass> pass;
        std::string failure;
        try {
            pass = run_threshold(users, tau, config);
        } catch (const Error& e) {
            failure = e.what();
        }
        for (int x : activity_filters) {
            SweepCell cell{tau, x, std::nullopt, failure};
            if (pass) {
                GroupReps t = filter_by_pre(pass->toxic, x);
                GroupReps c = filter_by_pre(pass->control, x);
                bool empty = std::any_of(t.begin(), t.end(), [](const auto& v) { return v.empty(); }) ||
                             std::any_of(c.begin(), c.end(), [](const auto& v) { return v.empty(); });
                if (empty) {
                    cell.note = "empty cohort after activity filter";
                } else {
                    cell.estimate = delta_core(t, c, cell_options(*pass, config, x));
                }
            }
            grid.cells.push_back(std::move(cell));
        }
    }
    return grid;
}

}  // namespace wikitox
