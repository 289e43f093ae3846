#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wikitox/comment_extract.hpp"
#include "wikitox/error.hpp"

namespace wikitox {

enum class Attribute { toxicity, severe_toxicity, identity_attack, insult, profanity, threat };

inline constexpr std::array<Attribute, 6> kAttributes = {
    Attribute::toxicity, Attribute::severe_toxicity, Attribute::identity_attack,
    Attribute::insult,   Attribute::profanity,       Attribute::threat,
};

// "TOXICITY", "SEVERE_TOXICITY", ... as used on the wire.
std::string_view wire_name(Attribute a);
// "toxicity", "severe_toxicity", ... as used in our files.
std::string_view field_name(Attribute a);

struct AttributeScores {
    std::array<double, 6> values{};

    double& operator[](Attribute a) { return values[static_cast<std::size_t>(a)]; }
    double operator[](Attribute a) const { return values[static_cast<std::size_t>(a)]; }
    double max() const;
    // Throws DataError unless every value is a probability.
    void validate() const;
    bool operator==(const AttributeScores&) const = default;
};

// A comment is toxic when any attribute reaches the threshold (inclusive).
bool is_toxic(const AttributeScores& s, double threshold);

enum class Language { en, de, fr, es, it, ru };
Language parse_language(std::string_view code);
std::string_view language_code(Language lang);

inline constexpr std::size_t kMaxScorableBytes = 20'480;

// Transient backend failure; the request may be retried.
class BackendUnavailable : public Error {
public:
    using Error::Error;
};

// Backend answered with something that is not a valid score response.
class MalformedResponse : public Error {
public:
    using Error::Error;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    // Scorer tag stored with every score and used as part of the cache key.
    virtual std::string id() const = 0;
    virtual AttributeScores analyze(std::string_view text, Language lang) = 0;
    virtual bool is_remote() const { return false; }
};

// Offline stand-in: each attribute's score is the fraction of word tokens that
// belong to that attribute's lexicon. Pure function of (text, language).
class LexiconScorer : public Scorer {
public:
    using Lexicon = std::set<std::string, std::less<>>;

    LexiconScorer();  // small built-in English lexicons
    explicit LexiconScorer(std::map<Attribute, Lexicon> lexicons);

    // Text file with lines "<attribute> <word>"; '#' starts a comment.
    static LexiconScorer from_file(const std::filesystem::path& path);

    std::string id() const override { return "mock-lexicon-v1"; }
    AttributeScores analyze(std::string_view text, Language lang) override;

private:
    std::map<Attribute, Lexicon> lexicons_;
};

// Lower-cased word tokens (ASCII letters, digits, apostrophes, and any non-ASCII byte).
std::vector<std::string> word_tokens(std::string_view text);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30'000};
};

using Sleeper = std::function<void(std::chrono::nanoseconds)>;

struct RemoteScorerOptions {
    std::string endpoint = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";
    std::string api_key;
    std::chrono::seconds timeout{30};
};

// Perspective-compatible comments:analyze client.
class RemoteScorer : public Scorer {
public:
    explicit RemoteScorer(RemoteScorerOptions options);
    ~RemoteScorer() override;

    std::string id() const override { return "perspective-v1alpha1"; }
    AttributeScores analyze(std::string_view text, Language lang) override;
    bool is_remote() const override { return true; }

    static std::string build_request(std::string_view text, Language lang);
    // Throws MalformedResponse.
    static AttributeScores parse_response(std::string_view body);

private:
    struct Endpoint;
    static std::unique_ptr<Endpoint> parse_endpoint(const std::string& url);
    RemoteScorerOptions options_;
    std::unique_ptr<Endpoint> endpoint_;
};

// Content-addressed score store. Optionally persisted as an append-only
// NDJSON file of {scorer, hash, scores} records. Concurrent readers, serialized writers.
class ScoreCache {
public:
    ScoreCache() = default;
    explicit ScoreCache(const std::filesystem::path& path);

    static std::string content_hash(std::string_view text, Language lang);

    std::optional<AttributeScores> get(const std::string& scorer_id, const std::string& hash) const;
    void put(const std::string& scorer_id, const std::string& hash, const AttributeScores& scores);
    std::size_t size() const;

private:
    static std::string key(const std::string& scorer_id, const std::string& hash) { return scorer_id + ':' + hash; }

    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, AttributeScores> entries_;
    std::optional<std::filesystem::path> path_;
    std::ofstream log_;
};

// Serves only what a ScoreCache already holds; misses are hard errors.
class CachedOnlyScorer : public Scorer {
public:
    explicit CachedOnlyScorer(std::string scorer_id) : scorer_id_(std::move(scorer_id)) {}
    std::string id() const override { return scorer_id_; }
    AttributeScores analyze(std::string_view, Language) override;

private:
    std::string scorer_id_;
};

// Spaces request starts at least 1/rate apart. rate <= 0 disables limiting.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second, Sleeper sleeper = {});
    void acquire();
    double rate() const { return rate_; }

private:
    double rate_;
    Sleeper sleeper_;
    std::mutex mutex_;
    std::optional<std::chrono::steady_clock::time_point> next_slot_;
};

// A scorer plus the cache, retry, and rate-limiting policy around it.
class ScoringClient {
public:
    ScoringClient(Scorer& scorer, Language lang, std::shared_ptr<ScoreCache> cache = std::make_shared<ScoreCache>(),
                  RetryPolicy retry = {}, double rate_limit = 0.0, Sleeper sleeper = {});

    Scorer& scorer() { return scorer_; }
    Language language() const { return lang_; }
    std::string scorer_id() const { return scorer_.id(); }
    std::uint64_t backend_requests() const { return backend_requests_.load(); }
    std::uint64_t cache_hits() const { return cache_hits_.load(); }

    // Backend call with retries; bypasses the cache.
    AttributeScores fetch(std::string_view text);
    // Cache lookup keyed by (scorer id, content hash); counts hits.
    std::optional<AttributeScores> cached(const std::string& hash);
    ScoreCache& cache() { return *cache_; }

private:
    Scorer& scorer_;
    Language lang_;
    std::shared_ptr<ScoreCache> cache_;
    RetryPolicy retry_;
    RateLimiter limiter_;
    Sleeper sleeper_;
    std::atomic<std::uint64_t> backend_requests_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
};

struct ScoreOutcome {
    enum class Status { scored, oversize };
    Status status = Status::scored;
    AttributeScores scores;
    bool cache_hit = false;
};

// Oversize texts (> kMaxScorableBytes) are not sent and come back as Status::oversize.
ScoreOutcome score(std::string_view text, ScoringClient& client);

struct ScoredComment {
    Comment comment;
    AttributeScores scores;
    std::string scorer_id;
};

struct CorpusReport {
    std::size_t scored = 0;
    std::size_t skipped_oversize = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t backend_requests = 0;
    std::string summary() const;
};

// Hard scorer failure while scoring one comment of a corpus.
class ScoringError : public Error {
public:
    ScoringError(const std::string& comment_id, const std::string& what)
        : Error("comment " + comment_id + ": " + what), comment_id_(comment_id) {}
    const std::string& comment_id() const { return comment_id_; }

private:
    std::string comment_id_;
};

// Scores every in-size comment exactly once, preserving input order. Up to
// `parallelism` requests are in flight at once.
std::vector<ScoredComment> score_corpus(std::span<const Comment> comments, ScoringClient& client,
                                        CorpusReport& report, unsigned parallelism = 1);

}  // namespace wikitox
