#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wikitox/time.hpp"

namespace wikitox {

struct Contributor {
    enum class Kind { registered, anonymous };

    Kind kind = Kind::anonymous;
    // Username for registered contributors, IP address (possibly empty when the
    // contributor was suppressed) for anonymous ones.
    std::string name;
    bool is_bot_flagged = false;

    static Contributor registered(std::string username);
    static Contributor anonymous(std::string ip);

    bool is_registered() const { return kind == Kind::registered; }
    bool operator==(const Contributor&) const = default;
};

struct Revision {
    std::uint64_t revision_id = 0;
    Instant timestamp{};
    Contributor contributor;
    std::string text;
};

struct PageHistory {
    std::uint64_t page_id = 0;
    std::string title;
    int namespace_id = 0;
    std::string owner_username;  // set for user-talk pages
    std::vector<Revision> revisions;
};

// The <siteinfo> header of an export file.
struct SiteInfo {
    std::string schema_version;
    std::string dbname;
    std::map<int, std::string> namespaces;
    int user_talk_namespace = 3;
    std::string user_talk_prefix = "User talk";
};

enum class Compression { none, bzip2, detect };

// Forward-only reader over the pages of a MediaWiki XML export. Only the page
// currently being parsed is held in memory. Not copyable; single consumer.
class DumpReader {
public:
    explicit DumpReader(const std::filesystem::path& path, Compression compression = Compression::detect);
    DumpReader(std::unique_ptr<std::istream> input, std::string source_name);
    ~DumpReader();
    DumpReader(const DumpReader&) = delete;
    DumpReader& operator=(const DumpReader&) = delete;
    DumpReader(DumpReader&&) noexcept;
    DumpReader& operator=(DumpReader&&) noexcept;

    // Next page in document order, or nullopt at end of document.
    // Throws ParseError on malformed or truncated input.
    std::optional<PageHistory> next();

    // Valid once the first page has been returned (or the stream is exhausted).
    const SiteInfo& site_info() const;
    const std::vector<std::string>& warnings() const;

    // Largest number of text bytes held for a single in-progress page.
    std::size_t peak_page_bytes() const;
    std::uint64_t bytes_read() const;

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

struct TalkPageFilter {
    bool include_talk_subpages = true;
};

// True for pages in the user-talk namespace; archive subpages ("User talk:A/Archive 1")
// are accepted only when the filter retains subpages.
bool is_user_talk(const PageHistory& page, const SiteInfo& site, const TalkPageFilter& filter = {});

// Owner of a user-talk title: prefix up to ':' removed, subpage suffix dropped.
std::string owner_from_title(const std::string& title, const std::string& prefix);

// Orders revisions by (timestamp, revision_id), stable.
PageHistory sort_history(PageHistory page);

}  // namespace wikitox
