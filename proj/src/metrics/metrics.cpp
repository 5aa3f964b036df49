#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "core/error.hpp"
#include "core/text.hpp"

namespace nestknn {

ContingencyTable contingency(const std::vector<bool>& pred,
                             const std::vector<bool>& truth) {
  if (pred.size() != truth.size())
    throw DataError("contingency: length mismatch (" +
                    std::to_string(pred.size()) + " vs " +
                    std::to_string(truth.size()) + ")");
  if (pred.empty()) throw DataError("contingency: empty input");
  ContingencyTable t;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) {
      truth[i] ? ++t.a : ++t.b;
    } else {
      truth[i] ? ++t.c : ++t.d;
    }
  }
  return t;
}

double pod(const ContingencyTable& t) {
  if (t.a + t.c == 0)
    throw DataError("pod is undefined: no observed events (a + c = 0)");
  return static_cast<double>(t.a) / static_cast<double>(t.a + t.c);
}

double pofa(const ContingencyTable& t) {
  if (t.b + t.d == 0)
    throw DataError("pofa is undefined: no observed non-events (b + d = 0)");
  return static_cast<double>(t.b) / static_cast<double>(t.b + t.d);
}

double hss(const ContingencyTable& t) {
  using I = __int128;
  const I a = static_cast<I>(t.a);
  const I b = static_cast<I>(t.b);
  const I c = static_cast<I>(t.c);
  const I d = static_cast<I>(t.d);
  const I den = (a + c) * (c + d) + (a + b) * (b + d);
  if (den == 0) throw DataError("hss is undefined: degenerate table");
  const I num = 2 * (a * d - b * c);
  return static_cast<double>(num) / static_cast<double>(den);
}

namespace {

// 1-based ranks; runs of equal values share their average rank.
std::vector<double> average_ranks(std::span<const double> v) {
  const size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](size_t l, size_t r) { return v[l] < v[r]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 +
                     1.0;
    for (size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DataError("spearman: length mismatch (" + std::to_string(x.size()) +
                    " vs " + std::to_string(y.size()) + ")");
  if (x.size() < 2) throw DataError("spearman: needs at least 2 pairs");
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw DataError("spearman: non-finite input");
  }
  const bool const_x =
      std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  const bool const_y =
      std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (const_x || const_y)
    throw DataError("spearman is undefined for a constant sequence");

  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

double rmse_normalized(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DataError("rmse_normalized: length mismatch (" +
                    std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  if (x.empty()) throw DataError("rmse_normalized: empty input");
  double ss = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0) || !(y[i] >= 0.0 && y[i] <= 1.0))
      throw DataError("rmse_normalized: values must lie in [0,1]");
    const double d = x[i] - y[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(x.size()));
}

ProbabilityHistogram::ProbabilityHistogram(int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least 1 bin");
  counts_.assign(static_cast<size_t>(bins), 0);
}

void ProbabilityHistogram::add(double value) {
  if (!(value >= 0.0 && value <= 1.0))
    throw DataError("histogram value outside [0,1]: " + format_double(value));
  size_t bin = static_cast<size_t>(value * static_cast<double>(bins()));
  if (bin >= counts_.size()) bin = counts_.size() - 1;
  ++counts_[bin];
  ++total_;
}

std::vector<double> ProbabilityHistogram::frequencies() const {
  if (total_ == 0) throw DataError("histogram has no observations");
  std::vector<double> f(counts_.size());
  for (size_t i = 0; i < counts_.size(); ++i)
    f[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  return f;
}

namespace {

double kl_epsilon(const ProbabilityHistogram& q) {
  return 1.0 / (10.0 * static_cast<double>(q.total()));
}

}  // namespace

double kl_divergence(const ProbabilityHistogram& p,
                     const ProbabilityHistogram& q) {
  if (p.bins() != q.bins())
    throw DataError("kl divergence: bin-count mismatch (" +
                    std::to_string(p.bins()) + " vs " +
                    std::to_string(q.bins()) + ")");
  const auto pf = p.frequencies();
  auto qf = q.frequencies();

  const double eps = kl_epsilon(q);
  bool regularized = false;
  for (size_t i = 0; i < qf.size(); ++i) {
    if (pf[i] > 0.0 && qf[i] == 0.0) {
      qf[i] = eps;
      regularized = true;
    }
  }
  if (regularized) {
    double sum = 0.0;
    for (double v : qf) sum += v;
    for (double& v : qf) v /= sum;
  }

  double kl = 0.0;
  for (size_t i = 0; i < pf.size(); ++i) {
    if (pf[i] > 0.0) kl += pf[i] * std::log(pf[i] / qf[i]);
  }
  return kl;
}

double kl_divergence_normalized(const ProbabilityHistogram& p,
                                const ProbabilityHistogram& q) {
  const double kl = kl_divergence(p, q);
  // A point mass on a regularized bin reaches ln((1+eps)/eps); every other
  // configuration stays below it, so this bounds the divergence.
  const double eps = kl_epsilon(q);
  return kl / std::log((1.0 + eps) / eps);
}

PhaseLabel wrf_phase_from_rates(double snow_rate_mm_h, double rain_rate_mm_h,
                                WrfRatioMode mode) {
  if (!(snow_rate_mm_h >= 0.0) || !(rain_rate_mm_h >= 0.0))
    throw DataError("wrf rates must be finite and >= 0");
  if (snow_rate_mm_h == 0.0 && rain_rate_mm_h == 0.0)
    throw DataError("wrf phase is undefined when both rates are 0");
  double f;
  if (mode == WrfRatioMode::Fraction) {
    f = snow_rate_mm_h / (snow_rate_mm_h + rain_rate_mm_h);
  } else {
    f = rain_rate_mm_h == 0.0 ? std::numeric_limits<double>::infinity()
                              : snow_rate_mm_h / rain_rate_mm_h;
  }
  if (f > 0.66) return PhaseLabel::Solid;
  if (f < 0.33) return PhaseLabel::Liquid;
  return PhaseLabel::Mixed;
}

std::pair<ChannelVector, double> signal_separation(
    const ChannelVector& clear_means, const ChannelVector& precip_means) {
  if (clear_means.size() != precip_means.size())
    throw DataError("signal separation: dimension mismatch (" +
                    std::to_string(clear_means.size()) + " vs " +
                    std::to_string(precip_means.size()) + ")");
  if (clear_means.empty())
    throw DataError("signal separation: empty channel vectors");
  ChannelVector diff(clear_means.size());
  double ss = 0.0;
  for (size_t i = 0; i < diff.size(); ++i) {
    diff[i] = precip_means[i] - clear_means[i];
    ss += diff[i] * diff[i];
  }
  return {std::move(diff),
          std::sqrt(ss / static_cast<double>(clear_means.size()))};
}

}  // namespace nestknn
