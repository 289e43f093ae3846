#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wikitox/comment_extract.hpp"
#include "wikitox/leaving.hpp"
#include "wikitox/loss_estimator.hpp"
#include "wikitox/toxicity.hpp"

namespace wikitox {

inline constexpr const char* kApiKeyEnv = "WIKITOX_API_KEY";

// Flat key = value file; '#' starts a comment; strings may be double-quoted;
// lists are comma-separated ("[a, b]" brackets optional).
struct Config {
    std::string language = "en";
    double threshold = 0.8;
    int censor_days = 100;
    double matching_tolerance = 0.1;
    int bootstrap_resamples = 1000;
    int repetitions = 100;
    std::uint64_t seed = 42;
    std::uint64_t sim_seed = 7;
    int replicates = 100;
    int horizon = 2000;
    double toxic_factor = 2.0;

    std::string remote_endpoint = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
    std::string api_key;
    double rate_limit = 10.0;
    unsigned parallelism = 4;
    std::string cache_path;

    std::vector<std::string> bots;
    bool bot_suffix_heuristic = true;
    bool exclude_anonymous = true;
    bool exclude_self = true;
    bool include_talk_subpages = true;

    std::string center_on = "virtual_event";  // or nearest_nontoxic_comment
    bool control_excludes_toxic_recipients = true;
    bool symmetric_days = false;              // day 0 left out, 100 days each side

    void validate() const;
    ExclusionConfig exclusions() const;
    LossConfig loss() const;
    LeavingConfig leaving() const;
    // Snapshot for manifests; the API key is never included.
    nlohmann::json snapshot() const;
};

// Unknown keys and invalid values throw DataError naming the line.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
// Only the scoring API key can be overridden from the environment.
void apply_environment(Config& config);

}  // namespace wikitox
