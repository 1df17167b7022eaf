#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace flowstab {

// All timestamps are UTC, second resolution.
using Timestamp = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kHour{3600};

// Parses ISO-8601 date-times such as "2019-01-01T00:00:00Z",
// "2019-01-01 00:00:00", "2019-01-01T01:00:00+01:00" or "2019-01-01T00:00".
// Offsets are applied so the result is UTC. Fractional seconds must be zero.
// Throws std::invalid_argument on malformed input.
Timestamp parse_timestamp(std::string_view text);

// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp t);

// Start of the UTC hour containing t.
Timestamp floor_hour(Timestamp t);

// Hour of day in [0, 23].
int hour_of_day(Timestamp t);

}  // namespace flowstab
