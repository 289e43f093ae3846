#include "wikitox/toxicity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wikitox/hash.hpp"

namespace wikitox {

using nlohmann::json;

std::string_view wire_name(Attribute a) {
    switch (a) {
        case Attribute::toxicity: return "TOXICITY";
        case Attribute::severe_toxicity: return "SEVERE_TOXICITY";
        case Attribute::identity_attack: return "IDENTITY_ATTACK";
        case Attribute::insult: return "INSULT";
        case Attribute::profanity: return "PROFANITY";
        case Attribute::threat: return "THREAT";
    }
    return "";
}

std::string_view field_name(Attribute a) {
    switch (a) {
        case Attribute::toxicity: return "toxicity";
        case Attribute::severe_toxicity: return "severe_toxicity";
        case Attribute::identity_attack: return "identity_attack";
        case Attribute::insult: return "insult";
        case Attribute::profanity: return "profanity";
        case Attribute::threat: return "threat";
    }
    return "";
}

double AttributeScores::max() const { return *std::max_element(values.begin(), values.end()); }

void AttributeScores::validate() const {
    for (auto a : kAttributes) {
        double v = (*this)[a];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw DataError(std::string("score ") + std::string(field_name(a)) + " outside [0,1]: " +
                            std::to_string(v));
        }
    }
}

bool is_toxic(const AttributeScores& s, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("toxicity threshold must be in (0,1)");
    return s.max() >= threshold;
}

Language parse_language(std::string_view code) {
    if (code == "en") return Language::en;
    if (code == "de") return Language::de;
    if (code == "fr") return Language::fr;
    if (code == "es") return Language::es;
    if (code == "it") return Language::it;
    if (code == "ru") return Language::ru;
    throw DataError("unsupported language '" + std::string(code) + "' (expected en, de, fr, es, it, ru)");
}

std::string_view language_code(Language lang) {
    switch (lang) {
        case Language::en: return "en";
        case Language::de: return "de";
        case Language::fr: return "fr";
        case Language::es: return "es";
        case Language::it: return "it";
        case Language::ru: return "ru";
    }
    return "";
}

// ---- lexicon mock ----

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' ||
                    c >= 0x80;
        if (word) {
            current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

LexiconScorer::LexiconScorer()
    : LexiconScorer(std::map<Attribute, Lexicon>{
          {Attribute::toxicity, {"idiot", "stupid", "moron", "dumb", "loser", "pathetic", "shut", "crap",
                                 "damn", "hate", "fool", "jerk", "scum", "trash"}},
          {Attribute::severe_toxicity, {"scum", "die", "kill"}},
          {Attribute::identity_attack, {"bigot"}},
          {Attribute::insult, {"idiot", "stupid", "moron", "dumb", "loser", "pathetic", "fool", "jerk",
                               "incompetent", "clown"}},
          {Attribute::profanity, {"damn", "crap", "hell"}},
          {Attribute::threat, {"kill", "hurt", "destroy", "die"}},
      }) {}

LexiconScorer::LexiconScorer(std::map<Attribute, Lexicon> lexicons) : lexicons_(std::move(lexicons)) {}

LexiconScorer LexiconScorer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read lexicon '" + path.string() + "'");
    std::map<Attribute, Lexicon> lexicons;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string attr, word;
        if (!(fields >> attr)) continue;
        if (!(fields >> word)) throw SchemaError("lexicon entry needs '<attribute> <word>'", lineno);
        auto it = std::find_if(kAttributes.begin(), kAttributes.end(),
                               [&](Attribute a) { return field_name(a) == attr; });
        if (it == kAttributes.end()) throw SchemaError("unknown attribute '" + attr + "'", lineno);
        for (auto& t : word_tokens(word)) lexicons[*it].insert(t);
    }
    return LexiconScorer(std::move(lexicons));
}

AttributeScores LexiconScorer::analyze(std::string_view text, Language /*lang*/) {
    AttributeScores s;
    auto tokens = word_tokens(text);
    if (tokens.empty()) return s;
    for (auto a : kAttributes) {
        auto it = lexicons_.find(a);
        if (it == lexicons_.end()) continue;
        std::size_t hits = std::count_if(tokens.begin(), tokens.end(),
                                         [&](const std::string& t) { return it->second.contains(t); });
        s[a] = static_cast<double>(hits) / static_cast<double>(tokens.size());
    }
    return s;
}

AttributeScores CachedOnlyScorer::analyze(std::string_view, Language) {
    throw MalformedResponse("not present in score cache for scorer '" + scorer_id_ + "'");
}

// ---- cache ----

namespace {

json scores_to_json(const AttributeScores& s) {
    json j = json::object();
    for (auto a : kAttributes) j[std::string(field_name(a))] = s[a];
    return j;
}

AttributeScores scores_from_json(const json& j) {
    AttributeScores s;
    for (auto a : kAttributes) s[a] = j.at(std::string(field_name(a))).get<double>();
    s.validate();
    return s;
}

}  // namespace

ScoreCache::ScoreCache(const std::filesystem::path& path) : path_(path) {
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            // A torn final record from an interrupted run is ignored.
            if (j.is_discarded() || !j.is_object()) continue;
            try {
                entries_[key(j.at("scorer").get<std::string>(), j.at("hash").get<std::string>())] =
                    scores_from_json(j.at("scores"));
            } catch (const std::exception&) {
                continue;
            }
        }
    }
    log_.open(path, std::ios::app);
    if (!log_) throw IoError("cannot open score cache '" + path.string() + "' for append");
}

std::string ScoreCache::content_hash(std::string_view text, Language lang) {
    std::string buf(language_code(lang));
    buf += '\n';
    buf += text;
    return sha256_hex(buf);
}

std::optional<AttributeScores> ScoreCache::get(const std::string& scorer_id, const std::string& hash) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key(scorer_id, hash));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ScoreCache::put(const std::string& scorer_id, const std::string& hash, const AttributeScores& scores) {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(key(scorer_id, hash), scores);
    if (!inserted) return;
    if (log_.is_open()) {
        json j = {{"scorer", scorer_id}, {"hash", hash}, {"scores", scores_to_json(scores)}};
        log_ << j.dump() << '\n';
        log_.flush();
    }
}

std::size_t ScoreCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

// ---- rate limiting / client ----

namespace {

void default_sleep(std::chrono::nanoseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

RateLimiter::RateLimiter(double requests_per_second, Sleeper sleeper)
    : rate_(requests_per_second), sleeper_(sleeper ? std::move(sleeper) : Sleeper(default_sleep)) {}

void RateLimiter::acquire() {
    if (rate_ <= 0.0) return;
    using clock = std::chrono::steady_clock;
    auto interval = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / rate_));
    clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto now = clock::now();
        slot = next_slot_ ? std::max(*next_slot_, now) : now;
        next_slot_ = slot + interval;
    }
    auto wait = slot - clock::now();
    if (wait > clock::duration::zero()) sleeper_(wait);
}

ScoringClient::ScoringClient(Scorer& scorer, Language lang, std::shared_ptr<ScoreCache> cache, RetryPolicy retry,
                             double rate_limit, Sleeper sleeper)
    : scorer_(scorer),
      lang_(lang),
      cache_(cache ? std::move(cache) : std::make_shared<ScoreCache>()),
      retry_(retry),
      limiter_(rate_limit, sleeper),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(default_sleep)) {
    if (retry_.max_attempts < 1) throw std::invalid_argument("retry policy needs at least one attempt");
}

AttributeScores ScoringClient::fetch(std::string_view text) {
    auto backoff = std::chrono::duration_cast<std::chrono::nanoseconds>(retry_.initial_backoff);
    for (int attempt = 1;; ++attempt) {
        limiter_.acquire();
        ++backend_requests_;
        try {
            AttributeScores s = scorer_.analyze(text, lang_);
            try {
                s.validate();
            } catch (const DataError& e) {
                throw MalformedResponse(e.what());
            }
            return s;
        } catch (const BackendUnavailable& e) {
            if (attempt >= retry_.max_attempts) {
                throw BackendUnavailable(std::string(e.what()) + " (gave up after " + std::to_string(attempt) +
                                         " attempts)");
            }
            sleeper_(backoff);
            auto next = std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::duration<double, std::nano>(static_cast<double>(backoff.count()) * retry_.multiplier));
            backoff = std::min(next, std::chrono::duration_cast<std::chrono::nanoseconds>(retry_.max_backoff));
        }
    }
}

std::optional<AttributeScores> ScoringClient::cached(const std::string& hash) {
    auto hit = cache_->get(scorer_.id(), hash);
    if (hit) ++cache_hits_;
    return hit;
}

ScoreOutcome score(std::string_view text, ScoringClient& client) {
    ScoreOutcome out;
    if (text.size() > kMaxScorableBytes) {
        out.status = ScoreOutcome::Status::oversize;
        return out;
    }
    std::string hash = ScoreCache::content_hash(text, client.language());
    if (auto hit = client.cached(hash)) {
        out.scores = *hit;
        out.cache_hit = true;
        return out;
    }
    out.scores = client.fetch(text);
    client.cache().put(client.scorer_id(), hash, out.scores);
    return out;
}

std::string CorpusReport::summary() const {
    return std::to_string(scored) + " scored, " + std::to_string(skipped_oversize) + " skipped oversize, " +
           std::to_string(cache_hits) + " cache hits, " + std::to_string(backend_requests) + " backend requests";
}

std::vector<ScoredComment> score_corpus(std::span<const Comment> comments, ScoringClient& client,
                                        CorpusReport& report, unsigned parallelism) {
    parallelism = std::max(1u, parallelism);
    const std::uint64_t requests_before = client.backend_requests();
    const std::uint64_t hits_before = client.cache_hits();

    std::vector<std::optional<ScoreOutcome>> outcomes(comments.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::optional<std::size_t> failed_index;
    std::string failure;

    auto worker = [&] {
        while (true) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= comments.size()) return;
            {
                std::lock_guard lock(error_mutex);
                if (failed_index) return;
            }
            try {
                outcomes[i] = score(comments[i].clean_text, client);
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (!failed_index || i < *failed_index) {
                    failed_index = i;
                    failure = e.what();
                }
                return;
            }
        }
    };

    if (parallelism == 1 || comments.size() < 2) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < std::min<std::size_t>(parallelism, comments.size()); ++t) pool.emplace_back(worker);
    }
    if (failed_index) throw ScoringError(comments[*failed_index].id(), failure);

    std::vector<ScoredComment> out;
    out.reserve(comments.size());
    const std::string scorer_id = client.scorer_id();
    for (std::size_t i = 0; i < comments.size(); ++i) {
        if (outcomes[i]->status == ScoreOutcome::Status::oversize) {
            ++report.skipped_oversize;
            continue;
        }
        out.push_back(ScoredComment{comments[i], outcomes[i]->scores, scorer_id});
        ++report.scored;
    }
    report.backend_requests += client.backend_requests() - requests_before;
    report.cache_hits += client.cache_hits() - hits_before;
    return out;
}

}  // namespace wikitox
