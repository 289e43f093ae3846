#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wikitox/abm.hpp"
#include "wikitox/activity.hpp"
#include "wikitox/comment_extract.hpp"
#include "wikitox/dump_ingest.hpp"
#include "wikitox/leaving.hpp"
#include "wikitox/loss_estimator.hpp"
#include "wikitox/toxicity.hpp"

namespace wikitox::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "0.3.0";

enum class Schema { pages, comments, scored, contribs };

// "wikitox.<name>/<version>"
std::string_view schema_id(Schema s);
Schema parse_schema(std::string_view id);

// Throws SchemaError (line 0) on missing or mistyped required fields; the reader
// fills in the line number.
void validate(const json& record, Schema s);

json to_json(const Contributor& c);
Contributor contributor_from_json(const json& j);
json to_json(const PageHistory& page);
PageHistory page_from_json(const json& j);
json to_json(const Comment& c);
Comment comment_from_json(const json& j);
json to_json(const AttributeScores& s);
AttributeScores scores_from_json(const json& j);
json to_json(const ScoredComment& s);
ScoredComment scored_from_json(const json& j);
json to_json(const ContributionLog& log);
ContributionLog contribs_from_json(const json& j);

// Deterministic single-line serialization (sorted keys, invalid UTF-8 replaced).
std::string dump_line(const json& j);
std::string dump_pretty(const json& j);

class NdjsonWriter {
public:
    NdjsonWriter(const fs::path& path, Schema schema);
    // Adds the "schema" field and validates before writing.
    void write(json record);
    void close();
    std::size_t count() const { return count_; }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    Schema schema_;
    std::ofstream out_;
    std::size_t count_ = 0;
};

// Calls fn for every non-blank line (1-based line numbers). Records carrying a
// "schema" field must name the expected schema.
void for_each_record(const fs::path& path, Schema schema, const std::function<void(const json&, std::size_t)>& fn);

std::vector<Comment> read_comments(const fs::path& path);
std::vector<ScoredComment> read_scored(const fs::path& path);
std::vector<ContributionLog> read_contribs(const fs::path& path);
void write_comments(const fs::path& path, std::span<const Comment> comments);
void write_scored(const fs::path& path, std::span<const ScoredComment> scored);
void write_contribs(const fs::path& path, std::span<const ContributionLog> logs);

// vectors.bin: "WTXAV1\0\0", u64 record count, then per record u32 name length,
// name bytes, i64 origin (epoch seconds), u32 day count, ceil(days / 8) bytes of
// LSB-first day bits. Integers little-endian.
void write_activity_vectors(const fs::path& path, std::span<const ActivityVector> vectors);
std::vector<ActivityVector> read_activity_vectors(const fs::path& path);

void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);
json read_json(const fs::path& path);

struct RunManifest {
    std::string stage;
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
    json config = json::object();
    std::uint64_t seed = 0;
    std::string tool_version{kToolVersion};
    Instant started{};
    Instant finished{};
};

fs::path manifest_path(const fs::path& output);
json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);
// Hashes the outputs, sets `finished` if unset, writes <first output>.manifest.json.
fs::path write_manifest(RunManifest manifest, std::span<const fs::path> outputs);
RunManifest read_manifest(const fs::path& path);
// Paths whose current hash differs from the recorded one (missing files included).
std::vector<std::string> verify_manifest(const RunManifest& m);

json to_json(const DeltaEstimate& d);
json to_json(const LossAnalysis& a);
json to_json(const SweepGrid& g);
json to_json(const LeaveCurve& c);
LeaveCurve leave_curve_from_json(const json& j);
json to_json(const LeavingAnalysis& a);

}  // namespace wikitox::io
