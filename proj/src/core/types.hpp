#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nestknn {

// Hydrometeor phase of precipitation.
enum class PhaseLabel : std::uint8_t { Liquid = 0, Mixed = 1, Solid = 2 };

// Database stratification target: clear sky or precipitation by phase.
enum class AtmosphericClass : std::uint8_t {
  Clear = 0,
  Liquid = 1,
  Mixed = 2,
  Solid = 3,
};

// Surface regime switching the stage parameter sets.
enum class LandSurfaceClass : std::uint8_t { SnowCovered = 0, NoSnow = 1 };

inline constexpr int kNumPhases = 3;
inline constexpr int kNumAtmoClasses = 4;
inline constexpr int kNumLandClasses = 2;
inline constexpr int kNumStages = 3;

// Plausibility bounds used by sample validation.
inline constexpr double kMinBrightnessK = 50.0;
inline constexpr double kMaxBrightnessK = 350.0;
inline constexpr double kMinTempK = 100.0;
inline constexpr double kMaxTempK = 400.0;

// Water freezing point; the snow wetness split point for skin/air temps.
inline constexpr double kFreezingK = 273.15;

std::string_view to_string(PhaseLabel p);
std::string_view to_string(AtmosphericClass a);
std::string_view to_string(LandSurfaceClass l);
PhaseLabel parse_phase(std::string_view s);
AtmosphericClass parse_atmo(std::string_view s);
LandSurfaceClass parse_land(std::string_view s);

PhaseLabel phase_of_atmo(AtmosphericClass a);  // Clear is an error
AtmosphericClass atmo_of_phase(PhaseLabel p);

// Multichannel brightness-temperature vector, Kelvin, positional channels.
using ChannelVector = std::vector<double>;

// One collocated observation: the radiometer vector plus the reference
// products and ancillary fields it was matched with. Optional members are
// absent in query-only files.
struct MatchedSample {
  std::uint64_t sample_id = 0;
  ChannelVector tb;
  std::optional<double> rate;  // mm/h, 0 means clear
  std::optional<PhaseLabel> active_phase;
  std::optional<double> passive_prob;  // P(liquid) in [0,1]
  std::optional<PhaseLabel> ref_phase;
  double snow_fraction = 0.0;  // fraction of footprint pixels flagged snow
  std::optional<double> skin_temp;
  std::optional<double> air_temp;
  double lat = 0.0;
  double lon = 0.0;
  std::int64_t timestamp = 0;  // Unix seconds, UTC

  bool precipitating() const { return rate.has_value() && *rate > 0.0; }
};

// Footprint land class from the snow pixel fraction: snow-covered only when
// strictly more than half the pixels indicate snow.
LandSurfaceClass land_of(double snow_fraction);
LandSurfaceClass land_of(const MatchedSample& s);

// Clear when rate == 0, otherwise the REF phase. Requires ref_phase for
// precipitating samples.
AtmosphericClass atmo_of(const MatchedSample& s);

// Throws DataError naming every violated field. channel_count < 1 is a
// ConfigError. Validation has no side effects, so it is idempotent.
void validate_sample(const MatchedSample& s, int channel_count);

// 2x2 contingency counts for a binary detection experiment.
//   a: hit (predicted yes, observed yes)     b: false alarm (yes, no)
//   c: miss (no, yes)                        d: correct negative (no, no)
struct ContingencyTable {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  std::uint64_t d = 0;

  std::uint64_t total() const { return a + b + c + d; }
};

}  // namespace nestknn
