#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace ground {

using Timestamp = std::chrono::sys_seconds;

// Accepts RFC-3339 date-times ("2015-10-10T08:30:00Z", "+03:00" offsets,
// fractional seconds truncated) and bare full-dates ("2015-10-10", midnight UTC).
std::optional<Timestamp> parse_rfc3339(std::string_view s);

// Always "YYYY-MM-DDTHH:MM:SSZ".
std::string format_rfc3339(Timestamp t);

Timestamp now_utc();

}  // namespace ground
