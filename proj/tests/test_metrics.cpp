#include <cmath>
#include <random>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "doctest.h"
#include "metrics/metrics.hpp"

using namespace nestknn;

TEST_CASE("contingency tallies the four quadrants") {
  std::vector<bool> pred{true, true, false, false, true};
  std::vector<bool> truth{true, false, true, false, true};
  ContingencyTable t = contingency(pred, truth);
  CHECK(t.a == 2);
  CHECK(t.b == 1);
  CHECK(t.c == 1);
  CHECK(t.d == 1);

  CHECK_THROWS_AS(contingency({true}, {true, false}), DataError);
  CHECK_THROWS_AS(contingency({}, {}), DataError);
}

TEST_CASE("pod and pofa guard their denominators") {
  ContingencyTable t{8, 2, 2, 8};
  CHECK(pod(t) == doctest::Approx(0.8));
  CHECK(pofa(t) == doctest::Approx(0.2));

  ContingencyTable no_events{0, 3, 0, 7};
  CHECK_THROWS_WITH_AS(pod(no_events), doctest::Contains("no observed events"),
                       DataError);
  ContingencyTable no_nonevents{3, 0, 7, 0};
  CHECK_THROWS_AS(pofa(no_nonevents), DataError);
}

TEST_CASE("heidke skill score hits its anchors exactly") {
  // Perfect forecast: no off-diagonal mass.
  CHECK(hss(ContingencyTable{12, 0, 0, 30}) == 1.0);
  // ad == bc is exactly chance.
  CHECK(hss(ContingencyTable{10, 5, 4, 2}) == 0.0);
  // Worked example: 2*(35*45 - 15*5) / ((40)(50) + (50)(60)) = 3000/5000.
  CHECK(hss(ContingencyTable{35, 15, 5, 45}) == doctest::Approx(0.6));
  CHECK_THROWS_AS(hss(ContingencyTable{0, 0, 0, 0}), DataError);
}

TEST_CASE("spearman handles monotone, tied, and degenerate input") {
  std::vector<double> up{1, 2, 3, 4, 5};
  std::vector<double> steep{10, 100, 1000, 10000, 100000};
  std::vector<double> down{5, 4, 3, 2, 1};
  CHECK(spearman(up, steep) == doctest::Approx(1.0));
  CHECK(spearman(up, down) == doctest::Approx(-1.0));

  // Tied pair in x takes the average rank 2.5: r = sqrt(0.9).
  std::vector<double> x{1, 2, 2, 3};
  std::vector<double> y{10, 20, 30, 40};
  CHECK(spearman(x, y) == doctest::Approx(std::sqrt(0.9)));

  std::vector<double> flat{2, 2, 2, 2, 2};
  CHECK_THROWS_WITH_AS(spearman(flat, up),
                       doctest::Contains("constant sequence"), DataError);
  CHECK_THROWS_AS(spearman(up, flat), DataError);
  std::vector<double> with_nan{1, std::nan(""), 3, 4, 5};
  CHECK_THROWS_AS(spearman(up, with_nan), DataError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1.0}, std::vector<double>{1.0}),
                  DataError);
}

TEST_CASE("normalized rmse stays inside the unit interval") {
  std::vector<double> a{0.0, 1.0};
  std::vector<double> b{1.0, 0.0};
  CHECK(rmse_normalized(a, b) == doctest::Approx(1.0));
  CHECK(rmse_normalized(a, a) == 0.0);

  std::vector<double> out{1.5, 0.0};
  CHECK_THROWS_WITH_AS(rmse_normalized(out, a), doctest::Contains("[0,1]"),
                       DataError);
  CHECK_THROWS_AS(rmse_normalized({}, {}), DataError);
  CHECK_THROWS_AS(rmse_normalized(a, std::vector<double>{0.5}), DataError);
}

TEST_CASE("probability histogram bins and folds the upper edge") {
  ProbabilityHistogram h;
  CHECK(h.bins() == 20);
  h.add(0.0);
  h.add(0.5);
  h.add(1.0);  // folds into the last bin instead of overflowing
  h.add(0.999);
  CHECK(h.counts()[0] == 1);
  CHECK(h.counts()[10] == 1);
  CHECK(h.counts()[19] == 2);
  CHECK(h.total() == 4);

  auto f = h.frequencies();
  double sum = 0.0;
  for (double v : f) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(h.add(-0.001), DataError);
  CHECK_THROWS_AS(h.add(1.001), DataError);
  CHECK_THROWS_AS(h.add(std::nan("")), DataError);
  CHECK_THROWS_AS(ProbabilityHistogram(0), ConfigError);
  CHECK_THROWS_AS(ProbabilityHistogram(5).frequencies(), DataError);
}

namespace {

ProbabilityHistogram hist2(std::uint64_t bin0, std::uint64_t bin1) {
  ProbabilityHistogram h(2);
  for (std::uint64_t i = 0; i < bin0; ++i) h.add(0.25);
  for (std::uint64_t i = 0; i < bin1; ++i) h.add(0.75);
  return h;
}

}  // namespace

TEST_CASE("kl divergence anchors") {
  ProbabilityHistogram p = hist2(3, 1);
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));

  // Fully supported: 0.75 ln(1.5) + 0.25 ln(0.5).
  ProbabilityHistogram q = hist2(2, 2);
  const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(kl_divergence(p, q) == doctest::Approx(expected).epsilon(1e-12));

  // P concentrated where Q still has support: exactly ln 2.
  CHECK(kl_divergence(hist2(2, 0), hist2(1, 1)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  ProbabilityHistogram p3(3);
  p3.add(0.1);
  CHECK_THROWS_WITH_AS(kl_divergence(p3, q), doctest::Contains("bin-count"),
                       DataError);
}

TEST_CASE("kl regularization keeps empty-bin overlap finite") {
  // P's mass sits on a bin where Q saw nothing.
  ProbabilityHistogram p = hist2(0, 5);
  ProbabilityHistogram q = hist2(10, 0);
  const double kl = kl_divergence(p, q);
  CHECK(std::isfinite(kl));
  // eps = 1/(10*10); the renormalized Q leaves ln((1+eps)/eps) for a point
  // mass, which is exactly the normalizer.
  const double eps = 0.01;
  CHECK(kl == doctest::Approx(std::log((1.0 + eps) / eps)).epsilon(1e-12));
  CHECK(kl_divergence_normalized(p, q) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kl divergence is nonnegative on random histogram pairs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int bins = 2 + static_cast<int>(uniform_below(rng, 15));
    ProbabilityHistogram p(bins), q(bins);
    const int np = 1 + static_cast<int>(uniform_below(rng, 200));
    const int nq = 1 + static_cast<int>(uniform_below(rng, 200));
    for (int i = 0; i < np; ++i) p.add(uniform01(rng));
    for (int i = 0; i < nq; ++i) q.add(uniform01(rng));
    const double kl = kl_divergence(p, q);
    CHECK(kl >= -1e-12);
    const double norm = kl_divergence_normalized(p, q);
    CHECK(norm >= -1e-12);
    CHECK(norm <= 1.0 + 1e-12);
  }
}

TEST_CASE("wrf phase thresholds in fraction mode") {
  CHECK(wrf_phase_from_rates(2.0, 1.0) == PhaseLabel::Solid);   // f = 2/3
  CHECK(wrf_phase_from_rates(1.0, 2.0) == PhaseLabel::Mixed);   // f = 1/3
  CHECK(wrf_phase_from_rates(0.3, 1.0) == PhaseLabel::Liquid);  // f < 0.33
  CHECK(wrf_phase_from_rates(5.0, 0.0) == PhaseLabel::Solid);
  CHECK(wrf_phase_from_rates(0.0, 5.0) == PhaseLabel::Liquid);
  CHECK_THROWS_WITH_AS(wrf_phase_from_rates(0.0, 0.0),
                       doctest::Contains("undefined"), DataError);
  CHECK_THROWS_AS(wrf_phase_from_rates(-1.0, 1.0), DataError);
  CHECK_THROWS_AS(wrf_phase_from_rates(std::nan(""), 1.0), DataError);
}

TEST_CASE("wrf phase thresholds in literal ratio mode") {
  const auto mode = WrfRatioMode::Literal;
  CHECK(wrf_phase_from_rates(1.0, 1.0, mode) == PhaseLabel::Solid);  // ratio 1
  CHECK(wrf_phase_from_rates(0.5, 1.0, mode) == PhaseLabel::Mixed);
  CHECK(wrf_phase_from_rates(0.3, 1.0, mode) == PhaseLabel::Liquid);
  // Snow with no rain at all: infinite ratio, solid.
  CHECK(wrf_phase_from_rates(0.1, 0.0, mode) == PhaseLabel::Solid);
  CHECK_THROWS_AS(wrf_phase_from_rates(0.0, 0.0, mode), DataError);
}

TEST_CASE("signal separation reports per-channel and rms differences") {
  ChannelVector clear{100.0, 200.0};
  ChannelVector precip{103.0, 204.0};
  auto [diff, rms] = signal_separation(clear, precip);
  REQUIRE(diff.size() == 2);
  CHECK(diff[0] == doctest::Approx(3.0));
  CHECK(diff[1] == doctest::Approx(4.0));
  CHECK(rms == doctest::Approx(std::sqrt(12.5)));

  CHECK_THROWS_AS(signal_separation({1.0}, {1.0, 2.0}), DataError);
  CHECK_THROWS_AS(signal_separation({}, {}), DataError);
}
