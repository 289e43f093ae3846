#include "wikitox/abm.hpp"

#include <algorithm>
#include <cmath>

#include "wikitox/parallel.hpp"
#include "wikitox/stats.hpp"

namespace wikitox {

double estimate_lambda(std::span<const ContributionLog> logs) {
    double total_days = 0.0;
    std::uint64_t gaps = 0;
    for (const auto& log : logs) {
        for (std::size_t i = 1; i < log.timestamps.size(); ++i) {
            auto s = (log.timestamps[i] - log.timestamps[i - 1]).count();
            total_days += static_cast<double>(s) / static_cast<double>(kSecondsPerDay);
            ++gaps;
        }
    }
    if (gaps == 0 || total_days <= 0.0) {
        throw SimulationError("cannot estimate lambda: no user has two or more contributions");
    }
    return static_cast<double>(gaps) / total_days;
}

std::string_view environment_name(Environment e) {
    return e == Environment::toxic ? "toxic" : "non_toxic";
}

namespace {

double clamp01(double x) { return std::isfinite(x) ? std::clamp(x, 0.0, 1.0) : 1.0; }

}  // namespace

double EnvironmentCurve::operator()(std::uint64_t n) const {
    if (n == 0) return 0.0;
    if (n <= static_cast<std::uint64_t>(kMaxRank)) return table[n - 1];
    return clamp01(tail.c * std::pow(static_cast<double>(n), -tail.alpha));
}

void EnvironmentCurve::validate() const {
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!(table[i] >= 0.0 && table[i] <= 1.0)) {
            throw SimulationError("environment probability at N=" + std::to_string(i + 1) + " outside [0, 1]");
        }
    }
    if (!std::isfinite(tail.c) || !std::isfinite(tail.alpha) || tail.c < 0.0) {
        throw SimulationError("environment tail parameters invalid");
    }
}

EnvironmentCurve EnvironmentCurve::constant(double q, Environment label) {
    EnvironmentCurve e;
    e.label = label;
    e.table.fill(q);
    e.tail = PowerLawFit{0.0, q, 0};
    e.validate();
    return e;
}

EnvironmentCurve EnvironmentCurve::power_law(double c, double alpha, Environment label) {
    EnvironmentCurve e;
    e.label = label;
    e.tail = PowerLawFit{alpha, c, 0};
    for (int n = 1; n <= kMaxRank; ++n) e.table[static_cast<std::size_t>(n - 1)] = clamp01(c * std::pow(n, -alpha));
    e.validate();
    return e;
}

EnvironmentCurve EnvironmentCurve::from_leave_curve(const LeaveCurve& curve, Environment label) {
    if (!curve.fit) {
        throw SimulationError("leave curve for cohort " + std::string(cohort_name(curve.cohort)) +
                              " has no power-law fit to extrapolate from");
    }
    EnvironmentCurve e;
    e.label = label;
    e.tail = *curve.fit;
    for (int n = 1; n <= kMaxRank; ++n) {
        auto p = curve.p(n);
        e.table[static_cast<std::size_t>(n - 1)] = p ? *p : clamp01(e.tail.c * std::pow(n, -e.tail.alpha));
    }
    e.validate();
    return e;
}

EnvironmentCurve EnvironmentCurve::scaled(double factor, Environment label) const {
    if (!(factor >= 0.0)) throw std::invalid_argument("scale factor must be >= 0");
    EnvironmentCurve e = *this;
    e.label = label;
    for (auto& v : e.table) v = clamp01(v * factor);
    e.tail.c *= factor;
    return e;
}

void Scenario::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw SimulationError("lambda must be > 0");
    if (horizon < 1) throw SimulationError("horizon must be >= 1 day");
    if (!arrivals) throw SimulationError("scenario has no arrival schedule");
}

Scenario Scenario::standard(int id, double lambda, int horizon) {
    Scenario s;
    s.id = id;
    s.lambda = lambda;
    s.horizon = horizon;
    switch (id) {
        case 1:
            s.name = "1000 users on day 1";
            s.arrivals = [](int day) -> std::uint64_t { return day == 1 ? 1000 : 0; };
            break;
        case 2:
            s.name = "1 user per day";
            s.arrivals = [](int day) -> std::uint64_t { return day >= 1 ? 1 : 0; };
            break;
        case 3:
            s.name = "1 user per day for 500 days";
            s.arrivals = [](int day) -> std::uint64_t { return day >= 1 && day <= 500 ? 1 : 0; };
            break;
        default: throw SimulationError("unknown scenario " + std::to_string(id) + " (expected 1, 2 or 3)");
    }
    return s;
}

SimResult simulate(const Scenario& scenario, const EnvironmentCurve& env, std::uint64_t seed,
                   const SimOptions& options) {
    scenario.validate();
    env.validate();
    const int horizon = scenario.horizon;
    const double end = static_cast<double>(horizon) + 1.0;  // day `horizon` is simulated in full
    SimResult result;
    result.seed = seed;
    // diff[k] changes the count from day k on
    std::vector<std::int64_t> diff(static_cast<std::size_t>(horizon) + 2, 0);
    auto add_span = [&](int first, int last) {  // inclusive days, clipped to [0, horizon]
        first = std::max(first, 0);
        last = std::min(last, horizon);
        if (first > last) return;
        ++diff[static_cast<std::size_t>(first)];
        --diff[static_cast<std::size_t>(last) + 1];
    };
    const std::optional<int> window = options.edited_within_days;
    if (window && *window < 1) throw SimulationError("edited-within window must be >= 1 day");

    std::uint64_t agent = 0;
    for (int day = 0; day <= horizon; ++day) {
        const std::uint64_t joining = scenario.arrivals(day);
        for (std::uint64_t j = 0; j < joining; ++j, ++agent) {
            Rng rng = make_rng(seed, "agent", agent);
            ++result.arrivals;
            double t = static_cast<double>(day);
            std::uint64_t n = 0;
            bool departed = false;
            int covered_until = -1;  // for the edited-within metric
            while (true) {
                ++n;  // contribution n at time t
                const int contribution_day = static_cast<int>(std::floor(t));
                if (window) {
                    int first = std::max(contribution_day, covered_until + 1);
                    int last = contribution_day + *window - 1;
                    add_span(first, last);
                    covered_until = std::max(covered_until, last);
                }
                if (uniform01(rng) < env(n)) {
                    departed = true;
                    break;
                }
                if (n <= static_cast<std::uint64_t>(kMaxRank)) ++result.survived[n];
                double gap = -std::log1p(-uniform01(rng)) / scenario.lambda;
                if (options.record_gaps) result.gaps.push_back(gap);
                if (t + gap >= end) break;
                t += gap;
            }
            if (!window) add_span(day, departed ? static_cast<int>(std::floor(t)) : horizon);
            if (departed) {
                ++result.departures;
            } else {
                ++result.final_population;
            }
        }
    }
    result.population.resize(static_cast<std::size_t>(horizon) + 1);
    std::int64_t running = 0;
    for (std::size_t k = 0; k < result.population.size(); ++k) {
        running += diff[k];
        result.population[k] = static_cast<std::uint64_t>(running);
    }
    return result;
}

std::uint64_t replicate_seed(std::uint64_t seed, int scenario, std::size_t replicate) {
    return substream_seed(seed, "replicate-" + std::to_string(scenario), replicate);
}

std::vector<ScenarioSummary> run_scenarios(const EnvironmentCurve& env_toxic, const EnvironmentCurve& env_nontoxic,
                                           double lambda, std::size_t replicates, std::uint64_t seed,
                                           const RunOptions& options) {
    if (replicates < 1) throw SimulationError("replicates must be >= 1");
    std::vector<ScenarioSummary> out;
    for (int id : options.scenarios) {
        Scenario scenario = Scenario::standard(id, lambda, options.horizon);
        for (const EnvironmentCurve* env : {&env_toxic, &env_nontoxic}) {
            std::vector<SimResult> runs(replicates);
            parallel_for(replicates, [&](std::size_t r) {
                runs[r] = simulate(scenario, *env, replicate_seed(seed, id, r), options.sim);
                runs[r].replicate_id = r;
            });
            ScenarioSummary s;
            s.scenario = id;
            s.environment = env->label;
            s.replicates = replicates;
            const std::size_t days = static_cast<std::size_t>(options.horizon) + 1;
            s.mean_population.assign(days, 0.0);
            s.std_population.assign(days, 0.0);
            std::vector<double> column(replicates);
            for (std::size_t k = 0; k < days; ++k) {
                for (std::size_t r = 0; r < replicates; ++r) column[r] = static_cast<double>(runs[r].population[k]);
                s.mean_population[k] = stats::mean(column);
                s.std_population[k] = std::sqrt(stats::sample_variance(column));
            }
            for (std::size_t r = 0; r < replicates; ++r) column[r] = static_cast<double>(runs[r].final_population);
            s.mean_final = stats::mean(column);
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace wikitox
