#include "wikitox/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace wikitox {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
    }
    return std::string(line);
}

double to_double(const std::string& v) {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a number");
    return d;
}

long long to_int(const std::string& v) {
    std::size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an integer");
    return i;
}

bool to_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument("expected true or false");
}

std::vector<std::string> to_list(std::string v) {
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = unquote(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using Setter = std::function<void(Config&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table{
        {"language", [](Config& c, const std::string& v) { c.language = v; }},
        {"threshold", [](Config& c, const std::string& v) { c.threshold = to_double(v); }},
        {"censor_days", [](Config& c, const std::string& v) { c.censor_days = static_cast<int>(to_int(v)); }},
        {"matching_tolerance", [](Config& c, const std::string& v) { c.matching_tolerance = to_double(v); }},
        {"bootstrap_resamples",
         [](Config& c, const std::string& v) { c.bootstrap_resamples = static_cast<int>(to_int(v)); }},
        {"repetitions", [](Config& c, const std::string& v) { c.repetitions = static_cast<int>(to_int(v)); }},
        {"seed", [](Config& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int(v)); }},
        {"sim_seed", [](Config& c, const std::string& v) { c.sim_seed = static_cast<std::uint64_t>(to_int(v)); }},
        {"replicates", [](Config& c, const std::string& v) { c.replicates = static_cast<int>(to_int(v)); }},
        {"horizon", [](Config& c, const std::string& v) { c.horizon = static_cast<int>(to_int(v)); }},
        {"toxic_factor", [](Config& c, const std::string& v) { c.toxic_factor = to_double(v); }},
        {"remote_endpoint", [](Config& c, const std::string& v) { c.remote_endpoint = v; }},
        {"api_key", [](Config& c, const std::string& v) { c.api_key = v; }},
        {"rate_limit", [](Config& c, const std::string& v) { c.rate_limit = to_double(v); }},
        {"parallelism", [](Config& c, const std::string& v) { c.parallelism = static_cast<unsigned>(to_int(v)); }},
        {"cache_path", [](Config& c, const std::string& v) { c.cache_path = v; }},
        {"bots", [](Config& c, const std::string& v) { c.bots = to_list(v); }},
        {"bot_suffix_heuristic", [](Config& c, const std::string& v) { c.bot_suffix_heuristic = to_bool(v); }},
        {"exclude_anonymous", [](Config& c, const std::string& v) { c.exclude_anonymous = to_bool(v); }},
        {"exclude_self", [](Config& c, const std::string& v) { c.exclude_self = to_bool(v); }},
        {"include_talk_subpages", [](Config& c, const std::string& v) { c.include_talk_subpages = to_bool(v); }},
        {"center_on", [](Config& c, const std::string& v) { c.center_on = v; }},
        {"control_excludes_toxic_recipients",
         [](Config& c, const std::string& v) { c.control_excludes_toxic_recipients = to_bool(v); }},
        {"symmetric_days", [](Config& c, const std::string& v) { c.symmetric_days = to_bool(v); }},
    };
    return table;
}

}  // namespace

void Config::validate() const {
    auto fail = [](const std::string& what) { throw DataError("config: " + what); };
    try {
        parse_language(language);
    } catch (const std::exception&) {
        fail("unsupported language '" + language + "'");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must be in (0, 1)");
    if (censor_days < 0) fail("censor_days must be >= 0");
    if (!(matching_tolerance > 0.0)) fail("matching_tolerance must be > 0");
    if (bootstrap_resamples < 1) fail("bootstrap_resamples must be >= 1");
    if (repetitions < 1) fail("repetitions must be >= 1");
    if (replicates < 1) fail("replicates must be >= 1");
    if (horizon < 1) fail("horizon must be >= 1");
    if (!(toxic_factor >= 0.0)) fail("toxic_factor must be >= 0");
    if (!(rate_limit > 0.0)) fail("rate_limit must be > 0");
    if (parallelism < 1) fail("parallelism must be >= 1");
    if (center_on != "virtual_event" && center_on != "nearest_nontoxic_comment") {
        fail("center_on must be virtual_event or nearest_nontoxic_comment");
    }
}

ExclusionConfig Config::exclusions() const {
    ExclusionConfig e;
    e.bot_usernames.insert(bots.begin(), bots.end());
    e.bot_suffix_heuristic = bot_suffix_heuristic;
    e.exclude_anonymous = exclude_anonymous;
    e.exclude_self = exclude_self;
    return e;
}

LossConfig Config::loss() const {
    LossConfig l;
    l.threshold = threshold;
    l.repetitions = repetitions;
    l.seed = seed;
    l.bootstrap_resamples = bootstrap_resamples;
    l.calibration.tolerance = matching_tolerance;
    l.control.center_on =
        center_on == "nearest_nontoxic_comment" ? CenterOn::nearest_nontoxic_comment : CenterOn::virtual_event;
    l.control.excludes_toxic_recipients = control_excludes_toxic_recipients;
    l.control.split = symmetric_days ? DaySplit::symmetric() : DaySplit::day0_after();
    return l;
}

LeavingConfig Config::leaving() const {
    LeavingConfig l;
    l.threshold = threshold;
    l.censor_days = censor_days;
    l.bootstrap_resamples = bootstrap_resamples;
    l.seed = seed;
    return l;
}

nlohmann::json Config::snapshot() const {
    return {{"language", language},
            {"threshold", threshold},
            {"censor_days", censor_days},
            {"matching_tolerance", matching_tolerance},
            {"bootstrap_resamples", bootstrap_resamples},
            {"repetitions", repetitions},
            {"seed", seed},
            {"sim_seed", sim_seed},
            {"replicates", replicates},
            {"horizon", horizon},
            {"toxic_factor", toxic_factor},
            {"remote_endpoint", remote_endpoint},
            {"rate_limit", rate_limit},
            {"parallelism", parallelism},
            {"cache_path", cache_path},
            {"bots", bots},
            {"bot_suffix_heuristic", bot_suffix_heuristic},
            {"exclude_anonymous", exclude_anonymous},
            {"exclude_self", exclude_self},
            {"include_talk_subpages", include_talk_subpages},
            {"center_on", center_on},
            {"control_excludes_toxic_recipients", control_excludes_toxic_recipients},
            {"symmetric_days", symmetric_days}};
}

Config parse_config(std::string_view text) {
    Config config;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string content = trim(strip_comment(raw));
        if (content.empty()) continue;
        // tolerate TOML table headers
        if (content.front() == '[' && content.back() == ']' && content.find('=') == std::string::npos) continue;
        auto eq = content.find('=');
        if (eq == std::string::npos) throw DataError("config line " + std::to_string(line) + ": expected key = value");
        std::string key = trim(content.substr(0, eq));
        std::string value = unquote(trim(content.substr(eq + 1)));
        auto it = setters().find(key);
        if (it == setters().end()) {
            throw DataError("config line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
        try {
            it->second(config, value);
        } catch (const std::exception& e) {
            throw DataError("config line " + std::to_string(line) + ": invalid value for '" + key + "': " + e.what());
        }
    }
    config.validate();
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_environment(Config& config) {
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) config.api_key = key;
}

}  // namespace wikitox
