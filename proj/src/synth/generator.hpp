#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace nestknn {

// One synthetic class: Gaussian channel model around `mean` with diagonal
// spread `sigma`, optionally tilted by a per-channel slope against
// log2(rate/center) so brighter or darker scenes track intensity.
struct ClassSpec {
  LandSurfaceClass land = LandSurfaceClass::NoSnow;
  AtmosphericClass atmo = AtmosphericClass::Clear;
  ChannelVector mean;
  ChannelVector sigma;                 // per channel, > 0
  ChannelVector slope_k_per_doubling;  // empty means all zero
  double rate_lo_mm_h = 0.0;           // log-uniform bounds, precip classes
  double rate_hi_mm_h = 0.0;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
};

// Deterministic stream for one class; ids run from first_id. Truth products
// (active phase, passive probability) are drawn so the merged reference
// label under ref_threshold equals the spec's atmospheric class.
std::vector<MatchedSample> generate(const ClassSpec& spec,
                                    std::uint64_t first_id,
                                    double ref_threshold);

struct ScenarioOutput {
  std::vector<MatchedSample> build;    // ids from 1
  std::vector<MatchedSample> holdout;  // ids from 1,000,000,001
};

// Two land classes x four atmospheric classes. Each atmospheric class
// offsets its own channel axis so every pair of class means sits exactly
// separation * sigma apart (requires at least 4 channels). The build stream
// carries n per class, the holdout stream n/2, on disjoint id ranges and
// independent seed streams.
ScenarioOutput scenario_separable(double separation_sigma,
                                  std::uint64_t n_per_class,
                                  std::uint64_t seed, int channel_count,
                                  double ref_threshold);

struct SynthManifest {
  std::string scenario = "separable";
  double separation_sigma = 6.0;
  std::uint64_t n_per_class = 1000;
  std::uint64_t seed = 1;
  int channel_count = 13;
  double ref_threshold = 0.5;
};

// Plain key=value manifest; unknown keys are ConfigErrors.
SynthManifest parse_manifest(const std::string& path);

}  // namespace nestknn
