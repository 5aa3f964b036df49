#include "core/time.hpp"

#include <array>

#include "core/error.hpp"
#include "core/text.hpp"

namespace nestknn {

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDateTime civil_from_seconds(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  const std::int64_t z = days + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);

  CivilDateTime c;
  c.year = static_cast<int>(y + (m <= 2));
  c.month = static_cast<int>(m);
  c.day = static_cast<int>(d);
  c.hour = static_cast<int>(rem / 3600);
  c.minute = static_cast<int>((rem % 3600) / 60);
  c.second = static_cast<int>(rem % 60);
  return c;
}

std::int64_t seconds_from_civil(const CivilDateTime& c) {
  return days_from_civil(c.year, c.month, c.day) * 86400 + c.hour * 3600 +
         c.minute * 60 + c.second;
}

namespace {

int parse_field(std::string_view s, size_t pos, size_t len,
                std::string_view what) {
  if (pos + len > s.size())
    throw DataError("timestamp '" + std::string(s) + "': truncated " +
                    std::string(what));
  int v = 0;
  for (size_t i = pos; i < pos + len; ++i) {
    char ch = s[i];
    if (ch < '0' || ch > '9')
      throw DataError("timestamp '" + std::string(s) + "': bad " +
                      std::string(what));
    v = v * 10 + (ch - '0');
  }
  return v;
}

void expect_char(std::string_view s, size_t pos, char c) {
  if (pos >= s.size() || s[pos] != c)
    throw DataError("timestamp '" + std::string(s) + "': expected '" +
                    std::string(1, c) + "' at offset " + std::to_string(pos));
}

bool leap(int y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return kDays[m - 1];
}

}  // namespace

std::int64_t parse_iso8601(std::string_view text) {
  std::string_view s = trim(text);
  if (s.size() != 10 && s.size() != 19 && s.size() != 20)
    throw DataError("timestamp '" + std::string(s) +
                    "': expected YYYY-MM-DD or YYYY-MM-DDThh:mm:ss[Z]");
  CivilDateTime c;
  c.year = parse_field(s, 0, 4, "year");
  expect_char(s, 4, '-');
  c.month = parse_field(s, 5, 2, "month");
  expect_char(s, 7, '-');
  c.day = parse_field(s, 8, 2, "day");
  if (s.size() > 10) {
    expect_char(s, 10, 'T');
    c.hour = parse_field(s, 11, 2, "hour");
    expect_char(s, 13, ':');
    c.minute = parse_field(s, 14, 2, "minute");
    expect_char(s, 16, ':');
    c.second = parse_field(s, 17, 2, "second");
    if (s.size() == 20) expect_char(s, 19, 'Z');
  }
  if (c.month < 1 || c.month > 12)
    throw DataError("timestamp '" + std::string(s) + "': month out of range");
  if (c.day < 1 || c.day > days_in_month(c.year, c.month))
    throw DataError("timestamp '" + std::string(s) + "': day out of range");
  if (c.hour > 23 || c.minute > 59 || c.second > 59)
    throw DataError("timestamp '" + std::string(s) +
                    "': time of day out of range");
  return seconds_from_civil(c);
}

std::string format_iso8601(std::int64_t t) {
  CivilDateTime c = civil_from_seconds(t);
  char buf[24];
  auto two = [](char* p, int v) {
    p[0] = static_cast<char>('0' + v / 10);
    p[1] = static_cast<char>('0' + v % 10);
  };
  int y = c.year;
  buf[0] = static_cast<char>('0' + (y / 1000) % 10);
  buf[1] = static_cast<char>('0' + (y / 100) % 10);
  buf[2] = static_cast<char>('0' + (y / 10) % 10);
  buf[3] = static_cast<char>('0' + y % 10);
  buf[4] = '-';
  two(buf + 5, c.month);
  buf[7] = '-';
  two(buf + 8, c.day);
  buf[10] = 'T';
  two(buf + 11, c.hour);
  buf[13] = ':';
  two(buf + 14, c.minute);
  buf[16] = ':';
  two(buf + 17, c.second);
  buf[19] = 'Z';
  return std::string(buf, 20);
}

int month_of(std::int64_t t) { return civil_from_seconds(t).month; }

}  // namespace nestknn
