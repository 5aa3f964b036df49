#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nestknn {

// Vote-fraction threshold p in the open interval (0, 1), stored as an exact
// reduced rational so the gate "votes > p * k" never depends on float
// rounding. Calibration produces thresholds of the form j/k which sit exactly
// on vote boundaries; the strict comparison must resolve those ties the same
// way on every platform.
class VoteThreshold {
public:
  VoteThreshold(std::int64_t num, std::int64_t den);

  // Accepts decimal text ("0.35") or a fraction ("7/20").
  static VoteThreshold parse(std::string_view text);

  // True when votes > p * k, evaluated as votes * den > num * k.
  bool passes(std::int64_t votes, std::int64_t k) const;

  double value() const;
  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }

  // Canonical reduced form "num/den"; parse(str()) round-trips exactly.
  std::string str() const;

  bool operator==(const VoteThreshold& o) const noexcept {
    return num_ == o.num_ && den_ == o.den_;
  }

private:
  std::int64_t num_;
  std::int64_t den_;
};

// votes * k_den > k_num, shared by VoteThreshold and the calibration
// admissibility filter k2 < p1 * k1.
bool rational_strictly_less(std::int64_t lhs_num, std::int64_t lhs_den,
                            std::int64_t rhs_num, std::int64_t rhs_den);

}  // namespace nestknn
