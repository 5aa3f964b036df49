#include "synth/generator.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/text.hpp"
#include "core/time.hpp"

namespace nestknn {

namespace {

// Geographic and temporal extent of the synthetic study region: one year
// over a mid-latitude box, so both seasons and varied snow climate appear.
constexpr double kLatMin = 30.0, kLatMax = 70.0;
constexpr double kLonMin = -125.0, kLonMax = -60.0;

std::int64_t time_start() {
  return seconds_from_civil({2015, 6, 1, 0, 0, 0});
}
std::int64_t time_end() { return seconds_from_civil({2016, 6, 1, 0, 0, 0}); }

// Location-dependent chance of dry (vs wet) snow, constant per 5-degree
// cell, so the climatological dry-snow share varies across the map and the
// evaluation's dry-snow bands all populate.
double dry_snow_chance(double lat, double lon) {
  static constexpr double kLevels[5] = {0.05, 0.18, 0.35, 0.55, 0.85};
  const auto row = static_cast<std::uint64_t>(std::floor((lat + 90.0) / 5.0));
  const auto col = static_cast<std::uint64_t>(std::floor((lon + 180.0) / 5.0));
  return kLevels[mix64(row * 72 + col) % 5];
}

void validate_spec(const ClassSpec& spec) {
  if (spec.mean.empty()) throw ConfigError("class spec: empty channel mean");
  if (spec.sigma.size() != spec.mean.size())
    throw ConfigError("class spec: sigma dimension mismatch");
  if (!spec.slope_k_per_doubling.empty() &&
      spec.slope_k_per_doubling.size() != spec.mean.size())
    throw ConfigError("class spec: slope dimension mismatch");
  for (double s : spec.sigma) {
    if (!(s > 0.0)) throw ConfigError("class spec: sigma must be > 0");
  }
  if (spec.atmo != AtmosphericClass::Clear) {
    if (!(spec.rate_lo_mm_h > 0.0) ||
        !(spec.rate_hi_mm_h > spec.rate_lo_mm_h))
      throw ConfigError(
          "class spec: precipitating classes need 0 < rate_lo < rate_hi");
  }
}

}  // namespace

std::vector<MatchedSample> generate(const ClassSpec& spec,
                                    std::uint64_t first_id,
                                    double ref_threshold) {
  validate_spec(spec);
  if (!(ref_threshold > 0.0) || !(ref_threshold < 1.0))
    throw ConfigError("ref threshold must lie strictly inside (0,1)");

  const size_t dim = spec.mean.size();
  const bool precip = spec.atmo != AtmosphericClass::Clear;
  const double log_lo = precip ? std::log(spec.rate_lo_mm_h) : 0.0;
  const double log_hi = precip ? std::log(spec.rate_hi_mm_h) : 0.0;
  // Zero intensity shift at the geometric mid-rate.
  const double center =
      precip ? std::sqrt(spec.rate_lo_mm_h * spec.rate_hi_mm_h) : 0.0;

  std::mt19937_64 eng(spec.seed);
  GaussianSource gauss;

  std::vector<MatchedSample> out;
  out.reserve(spec.count);
  for (std::uint64_t i = 0; i < spec.count; ++i) {
    MatchedSample s;
    s.sample_id = first_id + i;

    // Fixed draw order per sample: position, time, rate, channels, surface,
    // products. Changing it changes every downstream artifact.
    s.lat = uniform_range(eng, kLatMin, kLatMax);
    s.lon = uniform_range(eng, kLonMin, kLonMax);
    s.timestamp =
        time_start() + static_cast<std::int64_t>(
                           uniform01(eng) *
                           static_cast<double>(time_end() - time_start()));

    double shift = 0.0;
    if (precip) {
      const double rate = std::exp(uniform_range(eng, log_lo, log_hi));
      s.rate = rate;
      shift = std::log2(rate / center);
    } else {
      s.rate = 0.0;
    }

    s.tb.resize(dim);
    gauss.reset();
    for (size_t c = 0; c < dim; ++c) {
      const double slope = spec.slope_k_per_doubling.empty()
                               ? 0.0
                               : spec.slope_k_per_doubling[c];
      s.tb[c] = spec.mean[c] + slope * shift + spec.sigma[c] * gauss.next(eng);
    }

    if (spec.land == LandSurfaceClass::SnowCovered) {
      s.snow_fraction = 0.6 + 0.4 * uniform01(eng);
      const bool dry = uniform01(eng) < dry_snow_chance(s.lat, s.lon);
      if (dry) {
        s.skin_temp = 255.0 + 10.0 * uniform01(eng);
        s.air_temp = 255.0 + 10.0 * uniform01(eng);
      } else {
        s.skin_temp = 276.0 + 10.0 * uniform01(eng);
        s.air_temp = 276.0 + 10.0 * uniform01(eng);
      }
    } else {
      s.snow_fraction = 0.4 * uniform01(eng);
      s.skin_temp = 280.0 + 15.0 * uniform01(eng);
      s.air_temp = 280.0 + 15.0 * uniform01(eng);
    }

    if (precip) {
      // Products that merge back to the spec's label. v stays inside
      // (0.1, 0.9) so the probability never touches the threshold.
      const double v = 0.1 + 0.8 * uniform01(eng);
      const double liquid_side = ref_threshold + (1.0 - ref_threshold) * v;
      const double solid_side = ref_threshold * v;
      switch (spec.atmo) {
        case AtmosphericClass::Liquid:
          s.active_phase = PhaseLabel::Liquid;
          s.passive_prob = liquid_side;
          break;
        case AtmosphericClass::Solid:
          s.active_phase = PhaseLabel::Solid;
          s.passive_prob = solid_side;
          break;
        case AtmosphericClass::Mixed:
          // Alternate the disagreement direction so both mixed styles occur.
          if (i % 2 == 0) {
            s.active_phase = PhaseLabel::Solid;
            s.passive_prob = liquid_side;
          } else {
            s.active_phase = PhaseLabel::Liquid;
            s.passive_prob = solid_side;
          }
          break;
        case AtmosphericClass::Clear:
          throw InternalError("unreachable: clear class in product branch");
      }
    }

    out.push_back(std::move(s));
  }
  return out;
}

ScenarioOutput scenario_separable(double separation_sigma,
                                  std::uint64_t n_per_class,
                                  std::uint64_t seed, int channel_count,
                                  double ref_threshold) {
  if (!(separation_sigma >= 0.0))
    throw ConfigError("separation must be >= 0");
  if (channel_count < 4)
    throw ConfigError(
        "separable scenario needs at least 4 channels for equidistant class "
        "means");
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");

  constexpr double kSigma = 3.0;
  // Each class on its own axis at offset d/sqrt(2) puts every pair of means
  // exactly separation * kSigma apart.
  const double offset = separation_sigma * kSigma / std::sqrt(2.0);

  ScenarioOutput out;
  std::uint64_t next_build = 1;
  std::uint64_t next_hold = 1000000001ull;
  const std::uint64_t n_hold = std::max<std::uint64_t>(1, n_per_class / 2);

  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    for (auto atmo : {AtmosphericClass::Clear, AtmosphericClass::Liquid,
                      AtmosphericClass::Mixed, AtmosphericClass::Solid}) {
      ClassSpec spec;
      spec.land = land;
      spec.atmo = atmo;
      spec.mean.assign(static_cast<size_t>(channel_count), 230.0);
      spec.mean[static_cast<size_t>(atmo)] += offset;
      spec.sigma.assign(static_cast<size_t>(channel_count), kSigma);
      if (atmo != AtmosphericClass::Clear) {
        spec.rate_lo_mm_h = 0.1;
        spec.rate_hi_mm_h = 10.0;
      }

      spec.count = n_per_class;
      spec.seed = derive_seed(seed, static_cast<std::uint64_t>(land),
                              static_cast<std::uint64_t>(atmo));
      auto build = generate(spec, next_build, ref_threshold);
      next_build += spec.count;
      out.build.insert(out.build.end(),
                       std::make_move_iterator(build.begin()),
                       std::make_move_iterator(build.end()));

      spec.count = n_hold;
      spec.seed = derive_seed(seed, 16 + static_cast<std::uint64_t>(land),
                              static_cast<std::uint64_t>(atmo));
      auto hold = generate(spec, next_hold, ref_threshold);
      next_hold += spec.count;
      out.holdout.insert(out.holdout.end(),
                         std::make_move_iterator(hold.begin()),
                         std::make_move_iterator(hold.end()));
    }
  }
  return out;
}

SynthManifest parse_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  SynthManifest m;
  std::map<std::string, bool> seen;
  int lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    auto [key, value] = split_key_value(line, where);
    if (!seen.emplace(std::string(key), true).second)
      throw ConfigError(where + ": duplicate key '" + std::string(key) + "'");
    try {
      if (key == "scenario") {
        m.scenario = std::string(value);
      } else if (key == "separation_sigma") {
        m.separation_sigma = parse_double(value, "separation_sigma");
      } else if (key == "n_per_class") {
        m.n_per_class = parse_uint(value, "n_per_class");
      } else if (key == "seed") {
        m.seed = parse_uint(value, "seed");
      } else if (key == "channels") {
        m.channel_count = static_cast<int>(parse_int(value, "channels"));
      } else if (key == "ref_threshold") {
        m.ref_threshold = parse_double(value, "ref_threshold");
      } else {
        throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
      }
    } catch (const DataError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (m.scenario != "separable")
    throw ConfigError(path + ": unknown scenario '" + m.scenario + "'");
  if (!(m.separation_sigma >= 0.0))
    throw ConfigError(path + ": separation_sigma must be >= 0");
  if (m.n_per_class < 1)
    throw ConfigError(path + ": n_per_class must be >= 1");
  if (m.channel_count < 4 || m.channel_count > 4096)
    throw ConfigError(path + ": channels out of range");
  if (!(m.ref_threshold > 0.0) || !(m.ref_threshold < 1.0))
    throw ConfigError(path + ": ref_threshold must lie inside (0,1)");
  return m;
}

}  // namespace nestknn
