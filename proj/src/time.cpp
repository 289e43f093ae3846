#include "wikitox/time.hpp"

#include <charconv>
#include <cstdio>

#include "wikitox/error.hpp"

namespace wikitox {

namespace {

int read_fixed(std::string_view s, std::size_t pos, std::size_t len) {
    int value = 0;
    auto first = s.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
        throw DataError("bad timestamp '" + std::string(s) + "'");
    }
    return value;
}

}  // namespace

Instant parse_instant(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\n')) {
        text.remove_suffix(1);
    }
    if (text.empty()) throw DataError("empty timestamp");

    if (text.find('-', 1) == std::string_view::npos) {
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw DataError("bad timestamp '" + std::string(text) + "'");
        }
        return instant_from_epoch(value);
    }

    // 2004-08-14T07:53:46Z
    if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || text[16] != ':') {
        throw DataError("bad timestamp '" + std::string(text) + "'");
    }
    std::string_view rest = text.substr(19);
    if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
        throw DataError("timestamp is not UTC: '" + std::string(text) + "'");
    }
    int y = read_fixed(text, 0, 4);
    int mo = read_fixed(text, 5, 2);
    int d = read_fixed(text, 8, 2);
    int h = read_fixed(text, 11, 2);
    int mi = read_fixed(text, 14, 2);
    int se = read_fixed(text, 17, 2);

    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 60) {
        throw DataError("bad timestamp '" + std::string(text) + "'");
    }
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{se};
}

std::string format_instant(Instant t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
    return buf;
}

}  // namespace wikitox
