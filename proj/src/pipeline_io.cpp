#include "wikitox/pipeline_io.hpp"

#include <array>
#include <chrono>
#include <sstream>

#include "wikitox/hash.hpp"

namespace wikitox::io {

namespace {

enum class Kind { string, unsigned_int, integer, number, boolean, array, object, instant };

struct Field {
    std::string_view name;
    Kind kind;
};

constexpr std::array kPageFields{Field{"page_id", Kind::unsigned_int}, Field{"title", Kind::string},
                                 Field{"namespace", Kind::integer}, Field{"owner", Kind::string},
                                 Field{"revisions", Kind::array}};
constexpr std::array kRevisionFields{Field{"id", Kind::unsigned_int}, Field{"timestamp", Kind::instant},
                                     Field{"contributor", Kind::object}, Field{"text", Kind::string}};
constexpr std::array kCommentFields{Field{"page_id", Kind::unsigned_int},  Field{"revision_id", Kind::unsigned_int},
                                    Field{"block_index", Kind::unsigned_int}, Field{"recipient", Kind::string},
                                    Field{"author", Kind::object},          Field{"timestamp", Kind::instant},
                                    Field{"raw_text", Kind::string},       Field{"clean_text", Kind::string},
                                    Field{"byte_len", Kind::unsigned_int}};
constexpr std::array kContribFields{Field{"user", Kind::string}, Field{"timestamps", Kind::array}};

bool has_kind(const json& v, Kind k) {
    switch (k) {
        case Kind::string: return v.is_string();
        case Kind::unsigned_int: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        case Kind::integer: return v.is_number_integer();
        case Kind::number: return v.is_number();
        case Kind::boolean: return v.is_boolean();
        case Kind::array: return v.is_array();
        case Kind::object: return v.is_object();
        case Kind::instant:
            if (v.is_number_integer()) return true;
            if (!v.is_string()) return false;
            try {
                parse_instant(v.get<std::string>());
                return true;
            } catch (const std::exception&) {
                return false;
            }
    }
    return false;
}

std::string_view kind_name(Kind k) {
    switch (k) {
        case Kind::string: return "string";
        case Kind::unsigned_int: return "non-negative integer";
        case Kind::integer: return "integer";
        case Kind::number: return "number";
        case Kind::boolean: return "boolean";
        case Kind::array: return "array";
        case Kind::object: return "object";
        case Kind::instant: return "timestamp";
    }
    return "";
}

template <std::size_t N>
void check_fields(const json& j, const std::array<Field, N>& fields, std::string_view where) {
    if (!j.is_object()) throw SchemaError(std::string(where) + " is not a JSON object", 0);
    for (const auto& f : fields) {
        auto it = j.find(f.name);
        if (it == j.end()) {
            throw SchemaError(std::string(where) + ": missing required field \"" + std::string(f.name) + "\"", 0);
        }
        if (!has_kind(*it, f.kind)) {
            throw SchemaError(std::string(where) + ": field \"" + std::string(f.name) + "\" must be a " +
                                  std::string(kind_name(f.kind)),
                              0);
        }
    }
}

void check_contributor(const json& j, std::string_view where) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw SchemaError(std::string(where) + ": contributor needs a string \"kind\"", 0);
    }
    auto kind = j["kind"].get<std::string>();
    if (kind == "registered") {
        if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty()) {
            throw SchemaError(std::string(where) + ": registered contributor needs a non-empty \"name\"", 0);
        }
    } else if (kind == "anonymous") {
        if (!j.contains("ip") || !j["ip"].is_string()) {
            throw SchemaError(std::string(where) + ": anonymous contributor needs a string \"ip\"", 0);
        }
    } else {
        throw SchemaError(std::string(where) + ": unknown contributor kind \"" + kind + "\"", 0);
    }
}

void check_scores(const json& j) {
    if (!j.is_object()) throw SchemaError("\"scores\" must be an object", 0);
    for (Attribute a : kAttributes) {
        auto it = j.find(field_name(a));
        if (it == j.end() || !it->is_number()) {
            throw SchemaError("scores: missing numeric \"" + std::string(field_name(a)) + "\"", 0);
        }
        double v = it->get<double>();
        if (!(v >= 0.0 && v <= 1.0)) {
            throw SchemaError("scores: \"" + std::string(field_name(a)) + "\" outside [0, 1]", 0);
        }
    }
}

Instant instant_from(const json& v) {
    if (v.is_number_integer()) return instant_from_epoch(v.get<std::int64_t>());
    return parse_instant(v.get<std::string>());
}

}  // namespace

std::string_view schema_id(Schema s) {
    switch (s) {
        case Schema::pages: return "wikitox.page/1";
        case Schema::comments: return "wikitox.comment/1";
        case Schema::scored: return "wikitox.scored/1";
        case Schema::contribs: return "wikitox.contribs/1";
    }
    return "";
}

Schema parse_schema(std::string_view id) {
    for (Schema s : {Schema::pages, Schema::comments, Schema::scored, Schema::contribs}) {
        if (schema_id(s) == id) return s;
    }
    throw DataError("unknown schema id '" + std::string(id) + "'");
}

void validate(const json& record, Schema s) {
    if (record.is_object() && record.contains("schema")) {
        const auto& id = record["schema"];
        if (!id.is_string() || id.get<std::string>() != schema_id(s)) {
            throw SchemaError("record schema " + id.dump() + " does not match expected \"" +
                                  std::string(schema_id(s)) + "\"",
                              0);
        }
    }
    switch (s) {
        case Schema::pages:
            check_fields(record, kPageFields, "page");
            for (const auto& rev : record["revisions"]) {
                check_fields(rev, kRevisionFields, "revision");
                check_contributor(rev["contributor"], "revision");
            }
            break;
        case Schema::comments:
        case Schema::scored:
            check_fields(record, kCommentFields, "comment");
            check_contributor(record["author"], "comment");
            if (s == Schema::scored) {
                if (!record.contains("scores")) throw SchemaError("scored comment: missing required field \"scores\"", 0);
                check_scores(record["scores"]);
                if (!record.contains("scorer") || !record["scorer"].is_string()) {
                    throw SchemaError("scored comment: missing required field \"scorer\"", 0);
                }
            }
            break;
        case Schema::contribs:
            check_fields(record, kContribFields, "contribs");
            for (const auto& t : record["timestamps"]) {
                if (!has_kind(t, Kind::instant)) throw SchemaError("contribs: invalid timestamp " + t.dump(), 0);
            }
            break;
    }
}

json to_json(const Contributor& c) {
    if (c.is_registered()) return {{"kind", "registered"}, {"name", c.name}};
    return {{"kind", "anonymous"}, {"ip", c.name}};
}

Contributor contributor_from_json(const json& j) {
    if (j.at("kind").get<std::string>() == "registered") return Contributor::registered(j.at("name").get<std::string>());
    return Contributor::anonymous(j.at("ip").get<std::string>());
}

json to_json(const PageHistory& page) {
    json revs = json::array();
    for (const auto& r : page.revisions) {
        revs.push_back({{"id", r.revision_id},
                        {"timestamp", format_instant(r.timestamp)},
                        {"contributor", to_json(r.contributor)},
                        {"text", r.text}});
    }
    return {{"page_id", page.page_id},
            {"title", page.title},
            {"namespace", page.namespace_id},
            {"owner", page.owner_username},
            {"revisions", std::move(revs)}};
}

PageHistory page_from_json(const json& j) {
    PageHistory p;
    p.page_id = j.at("page_id").get<std::uint64_t>();
    p.title = j.at("title").get<std::string>();
    p.namespace_id = j.at("namespace").get<int>();
    p.owner_username = j.at("owner").get<std::string>();
    for (const auto& r : j.at("revisions")) {
        Revision rev;
        rev.revision_id = r.at("id").get<std::uint64_t>();
        rev.timestamp = instant_from(r.at("timestamp"));
        rev.contributor = contributor_from_json(r.at("contributor"));
        rev.text = r.at("text").get<std::string>();
        p.revisions.push_back(std::move(rev));
    }
    return p;
}

json to_json(const Comment& c) {
    return {{"id", c.id()},
            {"page_id", c.page_id},
            {"revision_id", c.revision_id},
            {"block_index", c.block_index},
            {"recipient", c.recipient},
            {"author", to_json(c.author)},
            {"timestamp", format_instant(c.timestamp)},
            {"raw_text", c.raw_text},
            {"clean_text", c.clean_text},
            {"byte_len", c.byte_len},
            {"possible_move", c.possible_move}};
}

Comment comment_from_json(const json& j) {
    Comment c;
    c.page_id = j.at("page_id").get<std::uint64_t>();
    c.revision_id = j.at("revision_id").get<std::uint64_t>();
    c.block_index = j.at("block_index").get<std::uint32_t>();
    c.recipient = j.at("recipient").get<std::string>();
    c.author = contributor_from_json(j.at("author"));
    c.timestamp = instant_from(j.at("timestamp"));
    c.raw_text = j.at("raw_text").get<std::string>();
    c.clean_text = j.at("clean_text").get<std::string>();
    c.byte_len = j.at("byte_len").get<std::size_t>();
    c.possible_move = j.value("possible_move", false);
    return c;
}

json to_json(const AttributeScores& s) {
    json j = json::object();
    for (Attribute a : kAttributes) j[std::string(field_name(a))] = s[a];
    return j;
}

AttributeScores scores_from_json(const json& j) {
    AttributeScores s;
    for (Attribute a : kAttributes) s[a] = j.at(std::string(field_name(a))).get<double>();
    s.validate();
    return s;
}

json to_json(const ScoredComment& s) {
    json j = to_json(s.comment);
    j["scores"] = to_json(s.scores);
    j["scorer"] = s.scorer_id;
    return j;
}

ScoredComment scored_from_json(const json& j) {
    return ScoredComment{comment_from_json(j), scores_from_json(j.at("scores")), j.at("scorer").get<std::string>()};
}

json to_json(const ContributionLog& log) {
    json ts = json::array();
    for (Instant t : log.timestamps) ts.push_back(format_instant(t));
    return {{"user", log.user}, {"timestamps", std::move(ts)}};
}

ContributionLog contribs_from_json(const json& j) {
    std::vector<Instant> ts;
    for (const auto& t : j.at("timestamps")) ts.push_back(instant_from(t));
    return ContributionLog::make(j.at("user").get<std::string>(), std::move(ts));
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string dump_pretty(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

NdjsonWriter::NdjsonWriter(const fs::path& path, Schema schema)
    : path_(path), schema_(schema), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
}

void NdjsonWriter::write(json record) {
    record["schema"] = schema_id(schema_);
    validate(record, schema_);
    out_ << dump_line(record) << '\n';
    if (!out_) throw IoError("write failed on " + path_.string());
    ++count_;
}

void NdjsonWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("closing " + path_.string() + " failed");
}

void for_each_record(const fs::path& path, Schema schema, const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError(path.filename().string() + ": invalid JSON: " + e.what(), number);
        }
        try {
            validate(record, schema);
            fn(record, number);
        } catch (const SchemaError& e) {
            // re-raise with the line number attached
            std::string what = e.what();
            if (what.rfind("line 0: ", 0) == 0) what = what.substr(8);
            throw SchemaError(path.filename().string() + ": " + what, number);
        } catch (const json::exception& e) {
            throw SchemaError(path.filename().string() + ": " + e.what(), number);
        } catch (const DataError& e) {
            throw SchemaError(path.filename().string() + ": " + e.what(), number);
        }
    }
    if (in.bad()) throw IoError("read failed on " + path.string());
}

std::vector<Comment> read_comments(const fs::path& path) {
    std::vector<Comment> out;
    for_each_record(path, Schema::comments, [&](const json& j, std::size_t) { out.push_back(comment_from_json(j)); });
    return out;
}

std::vector<ScoredComment> read_scored(const fs::path& path) {
    std::vector<ScoredComment> out;
    for_each_record(path, Schema::scored, [&](const json& j, std::size_t) { out.push_back(scored_from_json(j)); });
    return out;
}

std::vector<ContributionLog> read_contribs(const fs::path& path) {
    std::vector<ContributionLog> out;
    for_each_record(path, Schema::contribs, [&](const json& j, std::size_t) { out.push_back(contribs_from_json(j)); });
    return out;
}

void write_comments(const fs::path& path, std::span<const Comment> comments) {
    NdjsonWriter w(path, Schema::comments);
    for (const auto& c : comments) w.write(to_json(c));
    w.close();
}

void write_scored(const fs::path& path, std::span<const ScoredComment> scored) {
    NdjsonWriter w(path, Schema::scored);
    for (const auto& s : scored) w.write(to_json(s));
    w.close();
}

void write_contribs(const fs::path& path, std::span<const ContributionLog> logs) {
    NdjsonWriter w(path, Schema::contribs);
    for (const auto& l : logs) w.write(to_json(l));
    w.close();
}

namespace {

constexpr std::array<char, 8> kVectorsMagic{'W', 'T', 'X', 'A', 'V', '1', '\0', '\0'};

template <typename T>
void put_le(std::ostream& out, T value) {
    auto u = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& in, const fs::path& path) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        int c = in.get();
        if (c == std::char_traits<char>::eof()) throw DataError(path.string() + ": truncated activity vector file");
        u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(u);
}

}  // namespace

void write_activity_vectors(const fs::path& path, std::span<const ActivityVector> vectors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kVectorsMagic.data(), kVectorsMagic.size());
    put_le<std::uint64_t>(out, vectors.size());
    for (const auto& v : vectors) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.user.size()));
        out.write(v.user.data(), static_cast<std::streamsize>(v.user.size()));
        put_le<std::int64_t>(out, epoch_seconds(v.origin));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v.days.size()));
        for (std::size_t i = 0; i < v.days.size(); i += 8) {
            unsigned char byte = 0;
            for (std::size_t b = 0; b < 8 && i + b < v.days.size(); ++b) {
                if (v.days[i + b]) byte |= static_cast<unsigned char>(1u << b);
            }
            out.put(static_cast<char>(byte));
        }
    }
    out.close();
    if (out.fail()) throw IoError("write failed on " + path.string());
}

std::vector<ActivityVector> read_activity_vectors(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 8 || magic != kVectorsMagic) throw DataError(path.string() + ": not an activity vector file");
    auto count = get_le<std::uint64_t>(in, path);
    std::vector<ActivityVector> out;
    for (std::uint64_t r = 0; r < count; ++r) {
        ActivityVector v;
        auto name_len = get_le<std::uint32_t>(in, path);
        v.user.resize(name_len);
        in.read(v.user.data(), name_len);
        if (static_cast<std::uint32_t>(in.gcount()) != name_len) throw DataError(path.string() + ": truncated name");
        v.origin = instant_from_epoch(get_le<std::int64_t>(in, path));
        auto n_days = get_le<std::uint32_t>(in, path);
        v.days.assign(n_days, false);
        for (std::uint32_t i = 0; i < n_days; i += 8) {
            auto byte = get_le<std::uint8_t>(in, path);
            for (std::uint32_t b = 0; b < 8 && i + b < n_days; ++b) v.days[i + b] = (byte >> b) & 1u;
        }
        out.push_back(std::move(v));
    }
    return out;
}

void write_text(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (out.fail()) throw IoError("write failed on " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

fs::path manifest_path(const fs::path& output) {
    fs::path p = output;
    p += ".manifest.json";
    return p;
}

json to_json(const RunManifest& m) {
    return {{"stage", m.stage},
            {"inputs", m.inputs},
            {"outputs", m.outputs},
            {"config", m.config},
            {"seed", m.seed},
            {"tool_version", m.tool_version},
            {"started", format_instant(m.started)},
            {"finished", format_instant(m.finished)}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        m.stage = j.at("stage").get<std::string>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.started = parse_instant(j.at("started").get<std::string>());
        m.finished = parse_instant(j.at("finished").get<std::string>());
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid manifest: ") + e.what());
    }
    return m;
}

fs::path write_manifest(RunManifest manifest, std::span<const fs::path> outputs) {
    if (outputs.empty()) throw std::invalid_argument("manifest needs at least one output");
    for (const auto& o : outputs) manifest.outputs[o.string()] = sha256_file(o);
    if (manifest.finished == Instant{}) {
        manifest.finished = std::chrono::floor<Seconds>(std::chrono::system_clock::now());
    }
    fs::path path = manifest_path(outputs.front());
    write_text(path, dump_pretty(to_json(manifest)));
    return path;
}

RunManifest read_manifest(const fs::path& path) { return manifest_from_json(read_json(path)); }

std::vector<std::string> verify_manifest(const RunManifest& m) {
    std::vector<std::string> bad;
    for (const auto* group : {&m.inputs, &m.outputs}) {
        for (const auto& [path, hash] : *group) {
            std::error_code ec;
            if (!fs::exists(path, ec) || sha256_file(path) != hash) bad.push_back(path);
        }
    }
    return bad;
}

json to_json(const DeltaEstimate& d) {
    return {{"delta", d.delta},
            {"p_value", d.p_value},
            {"n_toxic", d.n_toxic},
            {"n_control", d.n_control},
            {"ci_low", d.ci_low},
            {"ci_high", d.ci_high},
            {"toxic_before", d.toxic_before},
            {"toxic_after", d.toxic_after},
            {"control_before", d.control_before},
            {"control_after", d.control_after},
            {"total_loss_human_years", total_loss_human_years(d.delta, d.n_toxic)}};
}

json to_json(const LossAnalysis& a) {
    return {{"estimate", to_json(a.estimate)},
            {"calibration",
             {{"p", a.calibration.p},
              {"target", a.calibration.target},
              {"achieved", a.calibration.achieved},
              {"steps", a.calibration.steps}}},
            {"toxic_pre_mean", a.toxic_pre_mean},
            {"control_pre_mean", a.control_pre_mean},
            {"matching_within_tolerance", a.matching_within_tolerance},
            {"toxic_users", a.toxic_users},
            {"excluded_users", a.excluded_users},
            {"control_pool", a.control_pool},
            {"profiles",
             {{"offsets_from", -kWindowRadius},
              {"toxic", a.toxic_profile},
              {"control", a.control_profile},
              {"shuffled", a.shuffled_profile}}}};
}

json to_json(const SweepGrid& g) {
    json cells = json::array();
    for (const auto& c : g.cells) {
        json cell = {{"threshold", c.threshold}, {"min_active_days", c.min_active_days}};
        cell["estimate"] = c.estimate ? to_json(*c.estimate) : json(nullptr);
        if (!c.note.empty()) cell["note"] = c.note;
        cells.push_back(std::move(cell));
    }
    return {{"thresholds", g.thresholds}, {"activity_filters", g.activity_filters}, {"cells", std::move(cells)}};
}

json to_json(const LeaveCurve& c) {
    json points = json::array();
    for (int n = 1; n <= kMaxRank; ++n) {
        auto i = static_cast<std::size_t>(n - 1);
        json pt = {{"n", n}, {"exactly", c.exactly[i]}, {"at_least", c.at_least[i]}};
        pt["p"] = c.probability[i] ? json(*c.probability[i]) : json(nullptr);
        pt["ci"] = c.ci[i] ? json::array({c.ci[i]->low, c.ci[i]->high}) : json(nullptr);
        points.push_back(std::move(pt));
    }
    json j = {{"cohort", cohort_name(c.cohort)}, {"points", std::move(points)}};
    j["fit"] = c.fit ? json{{"alpha", c.fit->alpha}, {"c", c.fit->c}, {"points", c.fit->points}} : json(nullptr);
    return j;
}

LeaveCurve leave_curve_from_json(const json& j) {
    LeaveCurve c;
    try {
        auto name = j.at("cohort").get<std::string>();
        if (name == "toxic_followed") {
            c.cohort = Cohort::toxic_followed;
        } else if (name == "other") {
            c.cohort = Cohort::other;
        } else if (name == "all") {
            c.cohort = Cohort::all;
        } else {
            throw DataError("unknown cohort '" + name + "'");
        }
        for (const auto& pt : j.at("points")) {
            int n = pt.at("n").get<int>();
            if (n < 1 || n > kMaxRank) throw DataError("curve point N=" + std::to_string(n) + " out of range");
            auto i = static_cast<std::size_t>(n - 1);
            c.exactly[i] = pt.at("exactly").get<std::uint64_t>();
            c.at_least[i] = pt.at("at_least").get<std::uint64_t>();
            if (!pt.at("p").is_null()) c.probability[i] = pt["p"].get<double>();
            if (pt.contains("ci") && !pt["ci"].is_null()) c.ci[i] = Interval{pt["ci"][0].get<double>(), pt["ci"][1].get<double>()};
        }
        if (j.contains("fit") && !j["fit"].is_null()) {
            c.fit = PowerLawFit{j["fit"].at("alpha").get<double>(), j["fit"].at("c").get<double>(),
                                j["fit"].value("points", std::size_t{0})};
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid leave curve: ") + e.what());
    }
    return c;
}

json to_json(const LeavingAnalysis& a) {
    return {{"dataset_end", format_instant(a.dataset_end)},
            {"users", a.users},
            {"cohorts", {{"toxic_followed", to_json(a.toxic)}, {"other", to_json(a.other)}, {"all", to_json(a.all)}}},
            {"significance",
             {{"confidence", a.significance.confidence},
              {"disjoint", a.significance.disjoint},
              {"compared", a.significance.compared},
              {"p_bound", a.significance.p_bound()}}}};
}

}  // namespace wikitox::io
