#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nestknn {

// Deterministic randomness across standard libraries. mt19937_64 output is
// pinned by the standard; the distribution adaptors below are not, so they
// are implemented here instead of using <random>'s distribution classes.

// splitmix64 finalizer; good avalanche for deriving stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent per-stratum stream; content must not depend on how other
// strata interleave in the input.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b) {
  return mix64(mix64(base ^ 0x5851f42d4c957f2dull) + mix64(a) * 3 + b);
}

// Uniform in [0, 1) with 53 random mantissa bits.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& g, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = g();
  } while (v >= limit);
  return v % n;
}

// Box-Muller standard normal; caches the second variate of each pair so a
// generation stream consumes engine outputs in a fixed pattern.
class GaussianSource {
public:
  double next(std::mt19937_64& g) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01(g);
    } while (u1 <= 0.0);
    const double u2 = uniform01(g);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  void reset() { has_spare_ = false; }

private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nestknn
