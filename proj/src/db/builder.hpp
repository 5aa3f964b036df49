#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "core/types.hpp"

namespace nestknn {

// Snowpack wetness from skin and 2 m air temperature. Indeterminate covers
// mixed signs and values exactly at freezing.
enum class SnowWetness : std::uint8_t { Dry = 0, Wet = 1, Indeterminate = 2 };

// Surface partition used by the evaluation report. Indeterminate wetness is
// folded into WetSnow: melt onset shows up in one of the two temperatures
// first, so a mixed-sign footprint is already transitioning.
enum class AnalysisSurfaceClass : std::uint8_t {
  Ground = 0,
  WetSnow = 1,
  DrySnow = 2,
};

std::string_view to_string(SnowWetness w);
std::string_view to_string(AnalysisSurfaceClass c);

// Combines the active-sensor phase with the discretized passive liquid
// probability: prob < threshold reads Solid, otherwise Liquid; agreement
// keeps the pure label, disagreement (including any active Mixed) is Mixed.
PhaseLabel merge_ref_phase(PhaseLabel active, double passive_prob,
                           double threshold);

// Footprint is snow-covered when strictly more than half its pixels carry a
// positive snow fraction.
bool classify_snow_cover(std::span<const double> pixel_fractions);

SnowWetness classify_snow_wetness(double skin_temp, double air_temp);

// Ground for no-snow footprints; snow footprints split by wetness with
// Indeterminate mapped to WetSnow. Missing temperatures read Indeterminate.
AnalysisSurfaceClass analysis_surface(const MatchedSample& s);

// Precipitation intensity bins: centers double from 0.5 to 8 mm/h, edges at
// center/sqrt(2) so consecutive bins tile [0.3536, 11.3137) without gaps.
struct IntensityBin {
  int index;
  double lo;      // inclusive
  double hi;      // exclusive
  double center;  // mm/h
};

inline constexpr int kNumIntensityBins = 5;
const std::array<IntensityBin, kNumIntensityBins>& intensity_bins();

// Rates outside the edge range clamp to the first or last bin. rate must be
// finite and > 0.
int assign_intensity_bin(double rate);

// Per-(land, atmosphere) sample quotas for a database of size M per land
// class: floor(M/2) clear, ceil(M/2) precipitating split evenly across the
// three phases with any remainder assigned in the order liquid, solid, mixed.
struct StratumQuota {
  int clear;
  int liquid;
  int mixed;
  int solid;

  int of(AtmosphericClass a) const;
  int total() const { return clear + liquid + mixed + solid; }
};

StratumQuota quota_for(int database_size);

// Balanced a-priori database: per land class, one sorted sample list per
// atmospheric class, each filled to quota.
struct AprioriDatabase {
  int channel_count = 0;
  std::vector<std::string> channel_order;
  int target_size = 0;  // M, per land class
  std::uint64_t seed = 0;
  double ref_threshold = 0.5;
  std::int64_t creation_time = 0;  // Unix seconds

  // strata[land][atmo], each sorted by sample_id.
  std::array<std::array<std::vector<MatchedSample>, kNumAtmoClasses>,
             kNumLandClasses>
      strata;

  const std::vector<MatchedSample>& stratum(LandSurfaceClass land,
                                            AtmosphericClass atmo) const;
  // All samples of one land class, ordered by sample_id.
  std::vector<const MatchedSample*> land_store(LandSurfaceClass land) const;
  std::size_t land_size(LandSurfaceClass land) const;
  std::size_t total_size() const;
  bool contains_id(std::uint64_t id) const;
  std::string summary() const;

  void rebuild_id_index();  // after direct stratum edits (load path)

private:
  std::vector<std::uint64_t> sorted_ids_;
};

struct BuildStats {
  std::uint64_t seen = 0;
  std::uint64_t offered = 0;             // passed validation and labelling
  std::uint64_t excluded_no_rate = 0;    // no truth rate, cannot stratify
  std::uint64_t excluded_no_products = 0;  // precipitating without both
                                           // phase products
  std::string summary() const;
};

// Single-pass balanced sampler. Samples are offered in stream order; each
// (land, atmosphere) stratum keeps a quota-sized uniform reservoir with its
// own RNG stream, so the result is independent of how strata interleave.
class DatabaseBuilder {
public:
  DatabaseBuilder(int channel_count, std::vector<std::string> channel_order,
                  int database_size, std::uint64_t seed, double ref_threshold);

  // Validates, derives the REF phase, stratifies, and offers the sample to
  // its reservoir. Duplicate sample ids are a DataError.
  void add(const MatchedSample& s);

  // Verifies every stratum reached quota (error names the stratum and its
  // count otherwise) and assembles the database, strata sorted by id.
  AprioriDatabase finish();

  const BuildStats& stats() const { return stats_; }

private:
  struct Reservoir {
    std::vector<MatchedSample> pool;
    std::uint64_t offered = 0;
    std::mt19937_64 rng;
    int capacity = 0;
  };

  int channel_count_;
  std::vector<std::string> channel_order_;
  int database_size_;
  std::uint64_t seed_;
  double ref_threshold_;
  StratumQuota quota_;
  std::array<std::array<Reservoir, kNumAtmoClasses>, kNumLandClasses>
      reservoirs_;
  std::unordered_set<std::uint64_t> seen_ids_;
  BuildStats stats_;
  bool finished_ = false;
};

void persist_database(const AprioriDatabase& db, const std::string& path);
AprioriDatabase load_database(const std::string& path);

}  // namespace nestknn
