#include "wikitox/comment_extract.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace wikitox {

std::string Comment::id() const {
    return std::to_string(page_id) + "/" + std::to_string(revision_id) + "/" + std::to_string(block_index);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    if (text.empty()) return lines;
    std::size_t start = 0;
    while (true) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
        if (start == text.size()) break;  // a final newline ends the last line
    }
    return lines;
}

namespace {

using Match = std::pair<std::size_t, std::size_t>;

// Linear-space middle-snake recursion over interned line ids.
class MyersAligner {
public:
    MyersAligner(const std::vector<int>& a, const std::vector<int>& b) : a_(a), b_(b) {}

    std::vector<Match> run() {
        compare(0, a_.size(), 0, b_.size());
        return std::move(out_);
    }

private:
    struct Snake {
        std::size_t x, y, u, v;
        std::size_t d;
    };

    void compare(std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi) {
        std::vector<Match> suffix;
        while (alo < ahi && blo < bhi && a_[alo] == b_[blo]) out_.emplace_back(alo++, blo++);
        while (alo < ahi && blo < bhi && a_[ahi - 1] == b_[bhi - 1]) suffix.emplace_back(--ahi, --bhi);

        if (alo < ahi && blo < bhi) {
            Snake s = middle_snake(alo, ahi, blo, bhi);
            if (s.d <= 1) {
                small_lcs(alo, ahi, blo, bhi);
            } else {
                compare(alo, alo + s.x, blo, blo + s.y);
                for (std::size_t i = s.x, j = s.y; i < s.u; ++i, ++j) out_.emplace_back(alo + i, blo + j);
                compare(alo + s.u, ahi, blo + s.v, bhi);
            }
        }
        out_.insert(out_.end(), suffix.rbegin(), suffix.rend());
    }

    Snake middle_snake(std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi) {
        const auto n = static_cast<std::ptrdiff_t>(ahi - alo);
        const auto m = static_cast<std::ptrdiff_t>(bhi - blo);
        const std::ptrdiff_t delta = n - m;
        const bool odd = (delta & 1) != 0;
        const std::ptrdiff_t max_d = (n + m + 1) / 2;
        const std::ptrdiff_t offset = max_d + 1;
        std::vector<std::ptrdiff_t> vf(static_cast<std::size_t>(2 * max_d + 3), 0);
        std::vector<std::ptrdiff_t> vb(static_cast<std::size_t>(2 * max_d + 3), 0);
        auto A = [&](std::ptrdiff_t i) { return a_[alo + static_cast<std::size_t>(i)]; };
        auto B = [&](std::ptrdiff_t j) { return b_[blo + static_cast<std::size_t>(j)]; };
        auto at = [&](std::vector<std::ptrdiff_t>& v, std::ptrdiff_t k) -> std::ptrdiff_t& {
            return v[static_cast<std::size_t>(k + offset)];
        };

        for (std::ptrdiff_t d = 0; d <= max_d; ++d) {
            for (std::ptrdiff_t k = -d; k <= d; k += 2) {
                std::ptrdiff_t x = (k == -d || (k != d && at(vf, k - 1) < at(vf, k + 1))) ? at(vf, k + 1)
                                                                                       : at(vf, k - 1) + 1;
                std::ptrdiff_t y = x - k;
                std::ptrdiff_t x0 = x, y0 = y;
                while (x < n && y < m && A(x) == B(y)) ++x, ++y;
                at(vf, k) = x;
                std::ptrdiff_t kr = delta - k;
                if (odd && kr >= -(d - 1) && kr <= d - 1 && x + at(vb, kr) >= n) {
                    return Snake{static_cast<std::size_t>(x0), static_cast<std::size_t>(y0),
                                 static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                 static_cast<std::size_t>(2 * d - 1)};
                }
            }
            for (std::ptrdiff_t k = -d; k <= d; k += 2) {
                std::ptrdiff_t x = (k == -d || (k != d && at(vb, k - 1) < at(vb, k + 1))) ? at(vb, k + 1)
                                                                                       : at(vb, k - 1) + 1;
                std::ptrdiff_t y = x - k;
                std::ptrdiff_t x0 = x, y0 = y;
                while (x < n && y < m && A(n - x - 1) == B(m - y - 1)) ++x, ++y;
                at(vb, k) = x;
                std::ptrdiff_t kf = delta - k;
                if (!odd && kf >= -d && kf <= d && at(vf, kf) + x >= n) {
                    return Snake{static_cast<std::size_t>(n - x), static_cast<std::size_t>(m - y),
                                 static_cast<std::size_t>(n - x0), static_cast<std::size_t>(m - y0),
                                 static_cast<std::size_t>(2 * d)};
                }
            }
        }
        return Snake{0, 0, 0, 0, 0};  // unreachable for non-empty inputs
    }

    // Quadratic fallback for degenerate subproblems.
    void small_lcs(std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi) {
        std::size_t n = ahi - alo, m = bhi - blo;
        std::vector<std::vector<std::uint32_t>> len(n + 1, std::vector<std::uint32_t>(m + 1, 0));
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = m; j-- > 0;) {
                len[i][j] = a_[alo + i] == b_[blo + j] ? len[i + 1][j + 1] + 1
                                                       : std::max(len[i + 1][j], len[i][j + 1]);
            }
        }
        std::size_t i = 0, j = 0;
        while (i < n && j < m) {
            if (a_[alo + i] == b_[blo + j]) {
                out_.emplace_back(alo + i, blo + j);
                ++i, ++j;
            } else if (len[i + 1][j] >= len[i][j + 1]) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    const std::vector<int>& a_;
    const std::vector<int>& b_;
    std::vector<Match> out_;
};

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> lcs_alignment(const std::vector<std::string_view>& old_lines,
                                                               const std::vector<std::string_view>& new_lines) {
    std::unordered_map<std::string_view, int> ids;
    auto intern = [&](const std::vector<std::string_view>& lines) {
        std::vector<int> out;
        out.reserve(lines.size());
        for (auto l : lines) out.push_back(ids.try_emplace(l, static_cast<int>(ids.size())).first->second);
        return out;
    };
    auto a = intern(old_lines);
    auto b = intern(new_lines);
    return MyersAligner(a, b).run();
}

std::vector<AddedBlock> diff_added_blocks(std::string_view old_text, std::string_view new_text) {
    auto old_lines = split_lines(old_text);
    auto new_lines = split_lines(new_text);
    auto matches = lcs_alignment(old_lines, new_lines);

    std::vector<bool> old_matched(old_lines.size(), false);
    std::vector<bool> new_matched(new_lines.size(), false);
    for (auto [i, j] : matches) {
        old_matched[i] = true;
        new_matched[j] = true;
    }
    std::unordered_set<std::string_view> deleted;
    for (std::size_t i = 0; i < old_lines.size(); ++i) {
        if (!old_matched[i] && !is_blank(old_lines[i])) deleted.insert(old_lines[i]);
    }

    std::vector<AddedBlock> blocks;
    std::size_t j = 0;
    while (j < new_lines.size()) {
        if (new_matched[j]) {
            ++j;
            continue;
        }
        AddedBlock block;
        block.first_line = j;
        bool any_content = false;
        bool all_deleted = true;
        while (j < new_lines.size() && !new_matched[j]) {
            if (block.line_count > 0) block.text += '\n';
            block.text += new_lines[j];
            if (!is_blank(new_lines[j])) {
                any_content = true;
                if (!deleted.contains(new_lines[j])) all_deleted = false;
            }
            ++block.line_count;
            ++j;
        }
        block.possible_move = any_content && all_deleted;
        blocks.push_back(std::move(block));
    }
    return blocks;
}

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

// Tags that separate words; inline ones such as <b> vanish without a gap.
bool breaks_words(std::string_view tag) {
    std::size_t i = tag.front() == '/' ? 1 : 0;
    std::size_t j = i;
    while (j < tag.size() && is_ascii_alpha(tag[j])) ++j;
    std::string name;
    for (char c : tag.substr(i, j - i)) name += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const std::set<std::string, std::less<>> block{"br", "p", "div", "li", "ul", "ol", "dl", "dd", "dt",
                                                           "tr", "td", "th", "table", "hr", "blockquote",
                                                           "pre", "h1", "h2", "h3", "h4", "h5", "h6"};
    return name.empty() || block.contains(name);
}

std::string strip_html(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '<') {
            if (s.substr(i, 4) == "<!--") {
                auto end = s.find("-->", i + 4);
                if (end != std::string_view::npos) {
                    out += ' ';
                    i = end + 3;
                    continue;
                }
                i += 4;  // unterminated comment opener, dropped literally
                continue;
            }
            if (i + 1 < s.size() && (is_ascii_alpha(s[i + 1]) || s[i + 1] == '/' || s[i + 1] == '!')) {
                auto end = s.find_first_of("<>", i + 1);
                if (end != std::string_view::npos && s[end] == '>') {
                    if (breaks_words(s.substr(i + 1, end - i - 1))) out += ' ';
                    i = end + 1;
                    continue;
                }
            }
        }
        out += s[i++];
    }
    return out;
}

// Removes every "{{…}}" span (nesting-aware); unmatched braces are dropped as literals.
std::string strip_templates(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> cut;  // [begin, end)
    std::vector<std::size_t> opens;
    std::size_t i = 0;
    while (i + 1 < s.size()) {
        if (s[i] == '{' && s[i + 1] == '{') {
            opens.push_back(i);
            i += 2;
        } else if (s[i] == '}' && s[i + 1] == '}') {
            if (!opens.empty()) {
                cut.emplace_back(opens.back(), i + 2);
                opens.pop_back();
            } else {
                cut.emplace_back(i, i + 2);
            }
            i += 2;
        } else {
            ++i;
        }
    }
    for (auto o : opens) cut.emplace_back(o, o + 2);
    std::vector<bool> drop(s.size(), false);
    for (auto [b, e] : cut) std::fill(drop.begin() + static_cast<std::ptrdiff_t>(b), drop.begin() + static_cast<std::ptrdiff_t>(e), true);
    std::string out;
    out.reserve(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!drop[k]) out += s[k];
    }
    return out;
}

// [[target|label]] -> label, [[target]] -> target, innermost first.
std::string convert_wikilinks(std::string s) {
    while (true) {
        auto close = s.find("]]");
        std::size_t open = std::string::npos;
        while (close != std::string::npos) {
            open = close >= 2 ? s.rfind("[[", close - 2) : std::string::npos;
            if (close >= 2 && open != std::string::npos) break;
            close = s.find("]]", close + 2);
        }
        if (close == std::string::npos || open == std::string::npos) break;
        std::string inner = s.substr(open + 2, close - open - 2);
        auto pipe = inner.rfind('|');
        std::string label = pipe == std::string::npos ? inner : inner.substr(pipe + 1);
        s = s.substr(0, open) + label + s.substr(close + 2);
    }
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && ((s[i] == '[' && s[i + 1] == '[') || (s[i] == ']' && s[i + 1] == ']'))) {
            ++i;
            continue;
        }
        out += s[i];
    }
    return out;
}

constexpr std::string_view kSchemes[] = {"http://", "https://", "ftp://", "mailto:", "//"};

std::size_t scheme_length(std::string_view s, std::size_t pos) {
    for (auto scheme : kSchemes) {
        if (s.substr(pos, scheme.size()) == scheme) return scheme.size();
    }
    return 0;
}

// [url label] -> label, [url] -> ""
std::string convert_external_links(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '[' && scheme_length(s, i + 1) > 0) {
            auto end = s.find_first_of("[]\n", i + 1);
            if (end != std::string_view::npos && s[end] == ']') {
                auto body = s.substr(i + 1, end - i - 1);
                auto space = body.find_first_of(" \t");
                if (space != std::string_view::npos) out += body.substr(space + 1);
                i = end + 1;
                continue;
            }
        }
        out += s[i++];
    }
    return out;
}

std::string strip_bare_urls(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        for (auto scheme : {std::string_view("http://"), std::string_view("https://"), std::string_view("ftp://")}) {
            if (s.substr(i, scheme.size()) == scheme) len = scheme.size();
        }
        if (len > 0) {
            i += len;
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '<' &&
                   s[i] != '"' && s[i] != '[' && s[i] != ']') {
                ++i;
            }
            continue;
        }
        out += s[i++];
    }
    return out;
}

const std::regex& signature_timestamp() {
    // "12:34, 5 June 2010 (UTC)", "12:34, 5. Jun. 2010 (CEST)"
    static const std::regex re(R"(\d{1,2}:\d{2}, \d{1,2}\.? [^\s\d()]+\.? \d{4} \([A-Z]{2,5}\))");
    return re;
}

// Drops runs of `c` with at least `min_run` repetitions.
std::string strip_runs(std::string_view s, char c, std::size_t min_run) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == c) {
            std::size_t j = i;
            while (j < s.size() && s[j] == c) ++j;
            if (j - i >= min_run) {
                i = j;
                continue;
            }
            out.append(s.substr(i, j - i));
            i = j;
            continue;
        }
        out += s[i++];
    }
    return out;
}

// Talk-page reply indentation and list markers at line starts.
std::string strip_line_markers(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool line_start = true;
    for (char c : s) {
        if (line_start && (c == ':' || c == '*' || c == '#' || c == ';')) continue;
        line_start = c == '\n';
        out += c;
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

std::string clean_once(std::string_view raw) {
    std::string s = strip_html(raw);
    s = strip_templates(s);
    s = convert_wikilinks(std::move(s));
    s = convert_external_links(s);
    s = strip_bare_urls(s);
    s = std::regex_replace(s, signature_timestamp(), " ");
    s = strip_runs(s, '~', 3);
    s = strip_runs(s, '=', 2);
    s = strip_runs(s, '\'', 2);
    s = strip_line_markers(s);
    return collapse_whitespace(s);
}

}  // namespace

std::string clean_markup(std::string_view raw) {
    // Each stage only deletes or shrinks, so repeating to a fixed point terminates
    // and makes the whole cleaner idempotent.
    std::string current = clean_once(raw);
    while (true) {
        std::string next = clean_once(current);
        if (next == current) return current;
        current = std::move(next);
    }
}

bool has_bot_suffix(std::string_view username) {
    if (username.size() < 3) return false;
    auto tail = username.substr(username.size() - 3);
    auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    if (lower(tail[0]) != 'b' || lower(tail[1]) != 'o' || lower(tail[2]) != 't') return false;
    if (username.size() == 3) return true;
    char prev = username[username.size() - 4];
    if (!is_ascii_alpha(prev)) return true;
    return tail[0] == 'B' && prev >= 'a' && prev <= 'z';
}

bool is_excluded_author(const Contributor& c, const std::string& owner, const ExclusionConfig& cfg) {
    if (!c.is_registered()) return cfg.exclude_anonymous;
    if (c.is_bot_flagged || cfg.bot_usernames.contains(c.name)) return true;
    if (cfg.bot_suffix_heuristic && has_bot_suffix(c.name)) return true;
    return cfg.exclude_self && c.name == owner;
}

std::vector<Comment> extract_comments(const PageHistory& page, const ExclusionConfig& cfg) {
    std::vector<Comment> comments;
    std::string_view previous;
    for (const Revision& rev : page.revisions) {
        if (!is_excluded_author(rev.contributor, page.owner_username, cfg)) {
            auto blocks = diff_added_blocks(previous, rev.text);
            std::uint32_t index = 0;
            for (auto& block : blocks) {
                std::string clean = clean_markup(block.text);
                if (clean.empty()) continue;
                Comment c;
                c.recipient = page.owner_username;
                c.author = rev.contributor;
                c.timestamp = rev.timestamp;
                c.byte_len = clean.size();
                c.clean_text = std::move(clean);
                c.raw_text = std::move(block.text);
                c.page_id = page.page_id;
                c.revision_id = rev.revision_id;
                c.block_index = index++;
                c.possible_move = block.possible_move;
                comments.push_back(std::move(c));
            }
        }
        previous = rev.text;
    }
    return comments;
}

}  // namespace wikitox
