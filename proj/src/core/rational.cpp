#include "core/rational.hpp"

#include <numeric>

#include "core/error.hpp"
#include "core/text.hpp"

namespace nestknn {

VoteThreshold::VoteThreshold(std::int64_t num, std::int64_t den) {
  if (den <= 0) throw ConfigError("vote threshold: denominator must be > 0");
  if (num <= 0 || num >= den)
    throw ConfigError("vote threshold must lie strictly inside (0, 1), got " +
                      std::to_string(num) + "/" + std::to_string(den));
  std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

VoteThreshold VoteThreshold::parse(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ConfigError("vote threshold: empty value");
  size_t slash = text.find('/');
  if (slash != std::string_view::npos) {
    std::int64_t n, d;
    try {
      n = parse_int(text.substr(0, slash), "vote threshold numerator");
      d = parse_int(text.substr(slash + 1), "vote threshold denominator");
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    return VoteThreshold(n, d);
  }
  size_t dot = text.find('.');
  if (dot == std::string_view::npos)
    throw ConfigError("vote threshold '" + std::string(text) +
                      "': expected a decimal in (0,1) or num/den");
  std::string digits;
  digits.reserve(text.size());
  std::int64_t den = 1;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (i == dot) continue;
    if (c < '0' || c > '9')
      throw ConfigError("vote threshold '" + std::string(text) +
                        "': malformed decimal");
    digits.push_back(c);
    if (i > dot) {
      if (den > (std::int64_t{1} << 56))
        throw ConfigError("vote threshold '" + std::string(text) +
                          "': too many decimal digits");
      den *= 10;
    }
  }
  if (digits.empty())
    throw ConfigError("vote threshold '" + std::string(text) +
                      "': malformed decimal");
  std::int64_t num = 0;
  for (char c : digits) {
    if (num > (std::int64_t{1} << 56))
      throw ConfigError("vote threshold '" + std::string(text) +
                        "': too many digits");
    num = num * 10 + (c - '0');
  }
  return VoteThreshold(num, den);
}

bool VoteThreshold::passes(std::int64_t votes, std::int64_t k) const {
  // votes > (num/den) * k  <=>  votes * den > num * k; both sides fit i128.
  return static_cast<__int128>(votes) * den_ >
         static_cast<__int128>(num_) * k;
}

double VoteThreshold::value() const {
  return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string VoteThreshold::str() const {
  return std::to_string(num_) + "/" + std::to_string(den_);
}

bool rational_strictly_less(std::int64_t lhs_num, std::int64_t lhs_den,
                            std::int64_t rhs_num, std::int64_t rhs_den) {
  return static_cast<__int128>(lhs_num) * rhs_den <
         static_cast<__int128>(rhs_num) * lhs_den;
}

}  // namespace nestknn
