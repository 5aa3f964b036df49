#include "core/types.hpp"

#include <cmath>

#include "core/error.hpp"

namespace nestknn {

std::string_view to_string(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::Liquid: return "liquid";
    case PhaseLabel::Mixed: return "mixed";
    case PhaseLabel::Solid: return "solid";
  }
  throw InternalError("unknown phase label");
}

std::string_view to_string(AtmosphericClass a) {
  switch (a) {
    case AtmosphericClass::Clear: return "clear";
    case AtmosphericClass::Liquid: return "liquid";
    case AtmosphericClass::Mixed: return "mixed";
    case AtmosphericClass::Solid: return "solid";
  }
  throw InternalError("unknown atmospheric class");
}

std::string_view to_string(LandSurfaceClass l) {
  switch (l) {
    case LandSurfaceClass::SnowCovered: return "snow";
    case LandSurfaceClass::NoSnow: return "nosnow";
  }
  throw InternalError("unknown land class");
}

PhaseLabel parse_phase(std::string_view s) {
  if (s == "liquid") return PhaseLabel::Liquid;
  if (s == "mixed") return PhaseLabel::Mixed;
  if (s == "solid") return PhaseLabel::Solid;
  throw DataError("unknown phase label '" + std::string(s) + "'");
}

AtmosphericClass parse_atmo(std::string_view s) {
  if (s == "clear") return AtmosphericClass::Clear;
  if (s == "liquid") return AtmosphericClass::Liquid;
  if (s == "mixed") return AtmosphericClass::Mixed;
  if (s == "solid") return AtmosphericClass::Solid;
  throw DataError("unknown atmospheric class '" + std::string(s) + "'");
}

LandSurfaceClass parse_land(std::string_view s) {
  if (s == "snow") return LandSurfaceClass::SnowCovered;
  if (s == "nosnow") return LandSurfaceClass::NoSnow;
  throw DataError("unknown land class '" + std::string(s) + "'");
}

PhaseLabel phase_of_atmo(AtmosphericClass a) {
  switch (a) {
    case AtmosphericClass::Liquid: return PhaseLabel::Liquid;
    case AtmosphericClass::Mixed: return PhaseLabel::Mixed;
    case AtmosphericClass::Solid: return PhaseLabel::Solid;
    case AtmosphericClass::Clear:
      throw InternalError("clear class has no phase");
  }
  throw InternalError("unknown atmospheric class");
}

AtmosphericClass atmo_of_phase(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::Liquid: return AtmosphericClass::Liquid;
    case PhaseLabel::Mixed: return AtmosphericClass::Mixed;
    case PhaseLabel::Solid: return AtmosphericClass::Solid;
  }
  throw InternalError("unknown phase label");
}

LandSurfaceClass land_of(double snow_fraction) {
  return snow_fraction > 0.5 ? LandSurfaceClass::SnowCovered
                             : LandSurfaceClass::NoSnow;
}

LandSurfaceClass land_of(const MatchedSample& s) {
  return land_of(s.snow_fraction);
}

AtmosphericClass atmo_of(const MatchedSample& s) {
  if (!s.rate.has_value())
    throw DataError("sample " + std::to_string(s.sample_id) +
                    ": atmospheric class needs a rate");
  if (*s.rate == 0.0) return AtmosphericClass::Clear;
  if (!s.ref_phase.has_value())
    throw DataError("sample " + std::to_string(s.sample_id) +
                    ": precipitating sample lacks a reference phase");
  return atmo_of_phase(*s.ref_phase);
}

void validate_sample(const MatchedSample& s, int channel_count) {
  if (channel_count < 1) throw ConfigError("channel_count must be >= 1");
  std::string problems;
  auto note = [&](const std::string& p) {
    if (!problems.empty()) problems += "; ";
    problems += p;
  };

  if (static_cast<int>(s.tb.size()) != channel_count)
    note("tb has " + std::to_string(s.tb.size()) + " channels, expected " +
         std::to_string(channel_count));
  for (size_t i = 0; i < s.tb.size(); ++i) {
    double v = s.tb[i];
    if (!std::isfinite(v) || v < kMinBrightnessK || v > kMaxBrightnessK) {
      note("tb[" + std::to_string(i) + "] out of plausible range");
      break;
    }
  }
  if (s.rate.has_value() && (!std::isfinite(*s.rate) || *s.rate < 0.0))
    note("rate must be finite and >= 0");
  if (s.passive_prob.has_value() &&
      (!std::isfinite(*s.passive_prob) || *s.passive_prob < 0.0 ||
       *s.passive_prob > 1.0))
    note("passive probability outside [0,1]");
  if (!std::isfinite(s.snow_fraction) || s.snow_fraction < 0.0 ||
      s.snow_fraction > 1.0)
    note("snow_fraction outside [0,1]");
  for (auto [name, t] : {std::pair<const char*, std::optional<double>>{
                             "skin_temp", s.skin_temp},
                         {"air_temp", s.air_temp}}) {
    if (t.has_value() &&
        (!std::isfinite(*t) || *t < kMinTempK || *t > kMaxTempK))
      note(std::string(name) + " out of plausible range");
  }
  if (!std::isfinite(s.lat) || s.lat < -90.0 || s.lat > 90.0)
    note("lat outside [-90,90]");
  if (!std::isfinite(s.lon) || s.lon < -180.0 || s.lon > 180.0)
    note("lon outside [-180,180]");

  if (!problems.empty())
    throw DataError("sample " + std::to_string(s.sample_id) + ": " + problems);
}

}  // namespace nestknn
