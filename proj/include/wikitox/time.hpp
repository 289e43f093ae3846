#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace wikitox {

// UTC instant with one-second resolution.
using Instant = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline constexpr std::int64_t kSecondsPerDay = 86'400;

inline constexpr Instant instant_from_epoch(std::int64_t s) { return Instant{Seconds{s}}; }
inline constexpr std::int64_t epoch_seconds(Instant t) { return t.time_since_epoch().count(); }

// Accepts "YYYY-MM-DDTHH:MM:SSZ" (the dump format) and plain epoch integers.
Instant parse_instant(std::string_view text);
std::string format_instant(Instant t);

}  // namespace wikitox
