#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace vulnsev {

using Timestamp = std::chrono::sys_seconds;

// Collapses every run of ASCII whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

bool is_valid_utf8(std::string_view bytes) noexcept;

// RFC 3339 UTC, second precision: "2024-05-01T12:00:00Z".
std::string format_timestamp(Timestamp t);
// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional fractional part and a "Z" or
// "+00:00" suffix. Throws ParseError otherwise.
Timestamp parse_timestamp(std::string_view text);
// "20240501"
std::string format_date_compact(Timestamp t);

Timestamp now_utc();

}  // namespace vulnsev
