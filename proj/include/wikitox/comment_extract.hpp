#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wikitox/dump_ingest.hpp"
#include "wikitox/time.hpp"

namespace wikitox {

struct Comment {
    std::string recipient;
    Contributor author;
    Instant timestamp{};
    std::string raw_text;
    std::string clean_text;
    std::size_t byte_len = 0;
    std::uint64_t page_id = 0;
    std::uint64_t revision_id = 0;
    std::uint32_t block_index = 0;  // position among the blocks added by one revision
    // Every line of the block was also removed elsewhere in the same edit, i.e.
    // the "comment" is most likely moved text.
    bool possible_move = false;

    // "<page_id>/<revision_id>/<block_index>"
    std::string id() const;
};

struct ExclusionConfig {
    std::set<std::string> bot_usernames;
    bool bot_suffix_heuristic = true;
    bool exclude_anonymous = true;
    bool exclude_self = true;
};

struct AddedBlock {
    std::string text;
    std::size_t first_line = 0;  // index into the new text's lines
    std::size_t line_count = 0;
    bool possible_move = false;
};

// Split on '\n'; a trailing '\r' is dropped from each line and a final newline adds no empty line.
std::vector<std::string_view> split_lines(std::string_view text);

// Index pairs (old_line, new_line) of a longest common subsequence of lines,
// increasing in both coordinates. Myers' O((N+M)D) algorithm after trimming
// the common prefix and suffix.
std::vector<std::pair<std::size_t, std::size_t>> lcs_alignment(const std::vector<std::string_view>& old_lines,
                                                               const std::vector<std::string_view>& new_lines);

// Maximal runs of new_text lines left unmatched by the line alignment, in
// document order. Deleted lines contribute nothing.
std::vector<AddedBlock> diff_added_blocks(std::string_view old_text, std::string_view new_text);

// Strips wiki and HTML markup down to the prose. Total and idempotent.
std::string clean_markup(std::string_view raw);

// "…bot" suffix rule: the trailing "bot" must start a new token, i.e. follow a
// non-letter, open the name, or begin a CamelCase word ("ExampleBot").
bool has_bot_suffix(std::string_view username);

bool is_excluded_author(const Contributor& c, const std::string& owner, const ExclusionConfig& cfg);

// One comment per added block with non-empty cleaned text, for each pair of
// consecutive revisions (the first revision is diffed against an empty page).
// Expects a sorted user-talk page.
std::vector<Comment> extract_comments(const PageHistory& page, const ExclusionConfig& cfg);

}  // namespace wikitox
