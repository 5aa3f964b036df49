#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/types.hpp"
#include "core/weights.hpp"

namespace nestknn {

enum class WrfRatioMode : std::uint8_t { Fraction, Literal };

// Run-wide settings shared by the CLI subcommands and the C API. Parsed from
// a `key = value` text file; every key has a default so an empty file is a
// valid configuration.
struct RunConfig {
  int channel_count = 13;
  std::vector<std::string> channel_order;  // defaults to ch01..chNN

  double ref_threshold = 0.5;  // passive-prob split point for the REF merge
  int database_size = 600;     // samples per (land, atmosphere-balanced) class set
  std::uint64_t seed = 1;

  std::vector<int> candidate_k = {25, 50, 100, 200, 400};

  // weights[stage][land], stage 0..2, land 0..1 (SnowCovered, NoSnow).
  std::array<std::array<WeightMatrix, 2>, 3> weights;

  std::optional<std::int64_t> window_start;  // inclusive, Unix seconds
  std::optional<std::int64_t> window_end;    // exclusive
  bool season_strict = false;  // error instead of skip outside the window

  double grid_cell_deg = 0.1;
  double zonal_band_deg = 1.0;
  WrfRatioMode wrf_ratio_mode = WrfRatioMode::Fraction;

  int threads = 1;

  const WeightMatrix& stage_weights(int stage, int land_index) const;
};

RunConfig default_config();

// "ch01".."chNN", the layout used when a file carries no channel names.
std::vector<std::string> default_channel_names(int n);

// Parses config text; `origin` names the file in error messages and anchors
// `file:` weight references. Unknown keys are ConfigErrors.
RunConfig parse_config(std::string_view text, const std::string& origin);
RunConfig load_config(const std::string& path);

// Weight value syntax, shared with the calibrated-parameter file:
//   identity | diag:w1,w2,... | full:r11,r12;r21,r22;... | file:path
WeightMatrix parse_weight_spec(std::string_view value, int dim,
                               const std::string& base_dir);
std::string weight_spec_string(const WeightMatrix& w);

// Land class index used across parameter tables: SnowCovered=0, NoSnow=1.
int land_index(LandSurfaceClass l);

}  // namespace nestknn
