#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nestknn {

// UTC civil time on top of Unix seconds. Hand-rolled because the toolchain's
// <chrono> calendar support is incomplete; the day arithmetic is the proleptic
// Gregorian algorithm (exact over the whole i64 range used here).

struct CivilDateTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;
};

std::int64_t days_from_civil(int y, int m, int d);
CivilDateTime civil_from_seconds(std::int64_t t);
std::int64_t seconds_from_civil(const CivilDateTime& c);

// Accepts "YYYY-MM-DD" (midnight) or "YYYY-MM-DDThh:mm:ss" with optional
// trailing 'Z'. Throws DataError on malformed or out-of-range fields.
std::int64_t parse_iso8601(std::string_view text);

// "YYYY-MM-DDThh:mm:ssZ"
std::string format_iso8601(std::int64_t t);

// Calendar month 1..12 of a UTC timestamp.
int month_of(std::int64_t t);

}  // namespace nestknn
