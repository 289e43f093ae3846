#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wikitox/activity.hpp"
#include "wikitox/leaving.hpp"
#include "wikitox/rng.hpp"

namespace wikitox {

class SimulationError : public Error {
public:
    using Error::Error;
};

// Pooled maximum-likelihood rate (per day) of exponential inter-contribution gaps.
double estimate_lambda(std::span<const ContributionLog> logs);

enum class Environment { toxic, non_toxic };
std::string_view environment_name(Environment e);

// Departure probability after the N-th contribution.
struct EnvironmentCurve {
    Environment label = Environment::non_toxic;
    std::array<double, kMaxRank> table{};
    PowerLawFit tail;  // used for N > 100, clamped to [0, 1]

    double operator()(std::uint64_t n) const;
    void validate() const;

    static EnvironmentCurve constant(double q, Environment label = Environment::non_toxic);
    static EnvironmentCurve power_law(double c, double alpha, Environment label = Environment::non_toxic);
    // Undefined points are filled from the curve's own fit; throws when there is no fit.
    static EnvironmentCurve from_leave_curve(const LeaveCurve& curve, Environment label);
    // Every value (and the tail) multiplied by factor and clamped.
    EnvironmentCurve scaled(double factor, Environment label) const;
};

struct Scenario {
    int id = 0;
    std::string name;
    std::function<std::uint64_t(int day)> arrivals;  // new agents joining on a day
    int horizon = 2000;                               // last simulated day
    double lambda = 1.0;

    void validate() const;
    // 1: 1000 agents on day 1. 2: one agent per day throughout. 3: one agent per day on days 1..500.
    static Scenario standard(int id, double lambda, int horizon = 2000);
};

struct SimOptions {
    bool record_gaps = false;
    std::optional<int> edited_within_days;  // count agents who edited in the last k days instead
};

struct SimResult {
    std::vector<std::uint64_t> population;  // days 0..horizon
    std::uint64_t arrivals = 0;
    std::uint64_t departures = 0;
    std::uint64_t final_population = 0;  // arrived and not departed at the end
    // survived[k]: agents that made contribution k and did not leave after it (k <= 100)
    std::array<std::uint64_t, kMaxRank + 1> survived{};
    std::vector<double> gaps;  // days, when recorded
    std::uint64_t replicate_id = 0;
    std::uint64_t seed = 0;
};

// Agent a draws from substream (seed, "agent", a): per contribution one uniform for the
// departure decision, then one for the gap. Environments simulated with the same seed
// therefore share randomness agent by agent.
SimResult simulate(const Scenario& scenario, const EnvironmentCurve& env, std::uint64_t seed,
                   const SimOptions& options = {});

struct ScenarioSummary {
    int scenario = 0;
    Environment environment = Environment::non_toxic;
    std::vector<double> mean_population;
    std::vector<double> std_population;
    double mean_final = 0.0;
    std::size_t replicates = 0;
};

struct RunOptions {
    std::vector<int> scenarios{1, 2, 3};
    int horizon = 2000;
    SimOptions sim;
};

// Replicate r of scenario s uses seed substream (seed, "replicate-<s>", r) for both environments.
std::vector<ScenarioSummary> run_scenarios(const EnvironmentCurve& env_toxic, const EnvironmentCurve& env_nontoxic,
                                           double lambda, std::size_t replicates, std::uint64_t seed,
                                           const RunOptions& options = {});

std::uint64_t replicate_seed(std::uint64_t seed, int scenario, std::size_t replicate);

}  // namespace wikitox
