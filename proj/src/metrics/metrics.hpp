#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "core/config.hpp"
#include "core/types.hpp"

namespace nestknn {

// a: hits, b: false alarms, c: misses, d: correct rejections.
ContingencyTable contingency(const std::vector<bool>& pred,
                             const std::vector<bool>& truth);

// Probability of detection a/(a+c). Zero denominators are DataErrors,
// never silent zeros.
double pod(const ContingencyTable& t);

// Probability of false alarm b/(b+d).
double pofa(const ContingencyTable& t);

// Heidke skill score 2(ad - bc) / ((a+c)(c+d) + (a+b)(b+d)); 1 is perfect,
// 0 is chance. Numerator and denominator are formed in 128-bit integers.
double hss(const ContingencyTable& t);

// Rank correlation with average ranks on ties. A constant sequence has no
// rank ordering and is a DataError.
double spearman(std::span<const double> x, std::span<const double> y);

// Root-mean-square difference of two probability sequences. Inputs live in
// [0,1], so the result already does too and no further scaling applies.
double rmse_normalized(std::span<const double> x, std::span<const double> y);

// Histogram of values in [0,1] over n equal bins; the upper edge folds into
// the last bin.
class ProbabilityHistogram {
 public:
  explicit ProbabilityHistogram(int bins = 20);

  void add(double value);

  int bins() const { return static_cast<int>(counts_.size()); }
  std::uint64_t total() const { return total_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  // Normalized frequencies, summing to 1 within 1e-12. An empty histogram
  // is a DataError.
  std::vector<double> frequencies() const;

 private:
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Discrete Kullback-Leibler divergence: sum of P(i) ln(P(i)/Q(i)) over bins
// with P(i) > 0, natural log. Bins where Q is empty under P's support get
// eps = 1/(10 * Q's total count) before Q renormalizes, keeping the sum
// finite on empirical histograms. Zero exactly when P equals Q bin-by-bin.
double kl_divergence(const ProbabilityHistogram& p,
                     const ProbabilityHistogram& q);

// kl_divergence scaled into [0,1] by the largest value the regularization
// admits: a point mass sitting on an eps-regularized bin of Q.
double kl_divergence_normalized(const ProbabilityHistogram& p,
                                const ProbabilityHistogram& q);

// Phase from model snowfall/rainfall rates. Fraction mode thresholds
// snow/(snow+rain) at 0.66/0.33; Literal mode applies the same bands to the
// raw snow/rain ratio. Both rates zero leaves the phase undefined.
PhaseLabel wrf_phase_from_rates(double snow_rate_mm_h, double rain_rate_mm_h,
                                WrfRatioMode mode = WrfRatioMode::Fraction);

// Per-channel mean difference (precipitating minus clear, so positive means
// emission warming) and the root mean squared difference across channels.
std::pair<ChannelVector, double> signal_separation(
    const ChannelVector& clear_means, const ChannelVector& precip_means);

}  // namespace nestknn
