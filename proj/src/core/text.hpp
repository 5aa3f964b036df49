#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nestknn {

// Locale-independent numeric text. All persisted floats go through
// format_double (shortest round-trip form) so rerun outputs are
// byte-identical regardless of host locale.
std::string format_double(double v);
std::string format_double_fixed(double v, int precision);

// Parsers throw DataError mentioning `what` on malformed input.
double parse_double(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);
std::uint64_t parse_uint(std::string_view text, std::string_view what);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

// Splits "key = value"; throws DataError mentioning `where` when '=' is absent.
std::pair<std::string_view, std::string_view> split_key_value(
    std::string_view line, std::string_view where);

bool starts_with(std::string_view s, std::string_view prefix);

std::string to_lower(std::string_view s);

}  // namespace nestknn
