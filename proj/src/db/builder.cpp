#include "db/builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/text.hpp"
#include "io/columnar.hpp"
#include "io/envelope.hpp"

namespace nestknn {

std::string_view to_string(SnowWetness w) {
  switch (w) {
    case SnowWetness::Dry: return "dry";
    case SnowWetness::Wet: return "wet";
    case SnowWetness::Indeterminate: return "indeterminate";
  }
  throw InternalError("unknown snow wetness");
}

std::string_view to_string(AnalysisSurfaceClass c) {
  switch (c) {
    case AnalysisSurfaceClass::Ground: return "ground";
    case AnalysisSurfaceClass::WetSnow: return "wet_snow";
    case AnalysisSurfaceClass::DrySnow: return "dry_snow";
  }
  throw InternalError("unknown analysis surface class");
}

PhaseLabel merge_ref_phase(PhaseLabel active, double passive_prob,
                           double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("ref threshold must lie strictly inside (0,1)");
  if (!std::isfinite(passive_prob) || passive_prob < 0.0 || passive_prob > 1.0)
    throw DataError("passive probability outside [0,1]");
  const PhaseLabel passive =
      passive_prob < threshold ? PhaseLabel::Solid : PhaseLabel::Liquid;
  return active == passive ? active : PhaseLabel::Mixed;
}

bool classify_snow_cover(std::span<const double> pixel_fractions) {
  if (pixel_fractions.empty())
    throw DataError("snow cover: empty pixel list");
  std::size_t indicating = 0;
  for (double f : pixel_fractions) {
    if (!std::isfinite(f) || f < 0.0 || f > 1.0)
      throw DataError("snow cover: pixel fraction outside [0,1]");
    if (f > 0.0) ++indicating;
  }
  return 2 * indicating > pixel_fractions.size();
}

SnowWetness classify_snow_wetness(double skin_temp, double air_temp) {
  if (!std::isfinite(skin_temp) || !std::isfinite(air_temp))
    throw DataError("snow wetness: non-finite temperature");
  const bool skin_below = skin_temp < kFreezingK;
  const bool air_below = air_temp < kFreezingK;
  const bool skin_above = skin_temp > kFreezingK;
  const bool air_above = air_temp > kFreezingK;
  if (skin_below && air_below) return SnowWetness::Dry;
  if (skin_above && air_above) return SnowWetness::Wet;
  return SnowWetness::Indeterminate;
}

AnalysisSurfaceClass analysis_surface(const MatchedSample& s) {
  if (land_of(s) == LandSurfaceClass::NoSnow)
    return AnalysisSurfaceClass::Ground;
  SnowWetness w = SnowWetness::Indeterminate;
  if (s.skin_temp && s.air_temp)
    w = classify_snow_wetness(*s.skin_temp, *s.air_temp);
  return w == SnowWetness::Dry ? AnalysisSurfaceClass::DrySnow
                               : AnalysisSurfaceClass::WetSnow;
}

const std::array<IntensityBin, kNumIntensityBins>& intensity_bins() {
  static const auto bins = [] {
    std::array<IntensityBin, kNumIntensityBins> b{};
    const double first_edge = 0.5 / std::sqrt(2.0);
    for (int i = 0; i < kNumIntensityBins; ++i) {
      // Doubling centers with edges at center/sqrt(2) makes hi(i) == lo(i+1)
      // exactly: both are first_edge * 2^(i+1).
      b[i].index = i;
      b[i].center = 0.5 * std::pow(2.0, i);
      b[i].lo = first_edge * std::pow(2.0, i);
      b[i].hi = first_edge * std::pow(2.0, i + 1);
    }
    return b;
  }();
  return bins;
}

int assign_intensity_bin(double rate) {
  if (!std::isfinite(rate) || rate <= 0.0)
    throw DataError("intensity bin: rate must be finite and > 0");
  const auto& bins = intensity_bins();
  if (rate < bins.front().lo) return 0;
  if (rate >= bins.back().hi) return kNumIntensityBins - 1;
  for (const auto& b : bins) {
    if (rate >= b.lo && rate < b.hi) return b.index;
  }
  throw InternalError("intensity bins failed to tile the rate range");
}

int StratumQuota::of(AtmosphericClass a) const {
  switch (a) {
    case AtmosphericClass::Clear: return clear;
    case AtmosphericClass::Liquid: return liquid;
    case AtmosphericClass::Mixed: return mixed;
    case AtmosphericClass::Solid: return solid;
  }
  throw InternalError("unknown atmospheric class");
}

StratumQuota quota_for(int database_size) {
  if (database_size < 8)
    throw ConfigError("database size must be >= 8 per land class");
  StratumQuota q{};
  q.clear = database_size / 2;
  const int precip = database_size - q.clear;  // ceil(M/2)
  const int base = precip / 3;
  const int rem = precip % 3;
  q.liquid = base + (rem > 0 ? 1 : 0);
  q.solid = base + (rem > 1 ? 1 : 0);
  q.mixed = base;
  return q;
}

const std::vector<MatchedSample>& AprioriDatabase::stratum(
    LandSurfaceClass land, AtmosphericClass atmo) const {
  return strata[static_cast<size_t>(land)][static_cast<size_t>(atmo)];
}

std::vector<const MatchedSample*> AprioriDatabase::land_store(
    LandSurfaceClass land) const {
  std::vector<const MatchedSample*> out;
  out.reserve(land_size(land));
  for (const auto& stratum : strata[static_cast<size_t>(land)])
    for (const auto& s : stratum) out.push_back(&s);
  std::sort(out.begin(), out.end(),
            [](const MatchedSample* a, const MatchedSample* b) {
              return a->sample_id < b->sample_id;
            });
  return out;
}

std::size_t AprioriDatabase::land_size(LandSurfaceClass land) const {
  std::size_t n = 0;
  for (const auto& stratum : strata[static_cast<size_t>(land)])
    n += stratum.size();
  return n;
}

std::size_t AprioriDatabase::total_size() const {
  return land_size(LandSurfaceClass::SnowCovered) +
         land_size(LandSurfaceClass::NoSnow);
}

bool AprioriDatabase::contains_id(std::uint64_t id) const {
  return std::binary_search(sorted_ids_.begin(), sorted_ids_.end(), id);
}

void AprioriDatabase::rebuild_id_index() {
  sorted_ids_.clear();
  sorted_ids_.reserve(total_size());
  for (const auto& per_land : strata)
    for (const auto& stratum : per_land)
      for (const auto& s : stratum) sorted_ids_.push_back(s.sample_id);
  std::sort(sorted_ids_.begin(), sorted_ids_.end());
  auto dup = std::adjacent_find(sorted_ids_.begin(), sorted_ids_.end());
  if (dup != sorted_ids_.end())
    throw DataError("database contains duplicate sample id " +
                    std::to_string(*dup));
}

std::string AprioriDatabase::summary() const {
  std::string out = "channels=" + std::to_string(channel_count) +
                    " M=" + std::to_string(target_size) +
                    " seed=" + std::to_string(seed) +
                    " ref_threshold=" + format_double(ref_threshold) + "\n";
  for (auto land : {LandSurfaceClass::SnowCovered, LandSurfaceClass::NoSnow}) {
    out += "land=" + std::string(to_string(land));
    std::size_t total = 0;
    for (auto atmo : {AtmosphericClass::Clear, AtmosphericClass::Liquid,
                      AtmosphericClass::Mixed, AtmosphericClass::Solid}) {
      const auto& st = stratum(land, atmo);
      out += " " + std::string(to_string(atmo)) + "=" +
             std::to_string(st.size());
      total += st.size();
    }
    out += " total=" + std::to_string(total) + "\n";
  }
  return out;
}

std::string BuildStats::summary() const {
  return "seen=" + std::to_string(seen) + " offered=" + std::to_string(offered) +
         " excluded_no_rate=" + std::to_string(excluded_no_rate) +
         " excluded_no_products=" + std::to_string(excluded_no_products);
}

DatabaseBuilder::DatabaseBuilder(int channel_count,
                                 std::vector<std::string> channel_order,
                                 int database_size, std::uint64_t seed,
                                 double ref_threshold)
    : channel_count_(channel_count),
      channel_order_(std::move(channel_order)),
      database_size_(database_size),
      seed_(seed),
      ref_threshold_(ref_threshold),
      quota_(quota_for(database_size)) {
  if (channel_count_ < 1) throw ConfigError("channel_count must be >= 1");
  if (!(ref_threshold_ > 0.0 && ref_threshold_ < 1.0))
    throw ConfigError("ref threshold must lie strictly inside (0,1)");
  if (channel_order_.empty())
    for (int i = 1; i <= channel_count_; ++i)
      channel_order_.push_back("ch" + std::string(i < 10 ? "0" : "") +
                               std::to_string(i));
  if (static_cast<int>(channel_order_.size()) != channel_count_)
    throw ConfigError("channel order size does not match channel_count");
  for (int land = 0; land < kNumLandClasses; ++land) {
    for (int atmo = 0; atmo < kNumAtmoClasses; ++atmo) {
      auto& r = reservoirs_[static_cast<size_t>(land)][static_cast<size_t>(atmo)];
      r.capacity = quota_.of(static_cast<AtmosphericClass>(atmo));
      r.pool.reserve(static_cast<size_t>(r.capacity));
      r.rng.seed(derive_seed(seed_, static_cast<std::uint64_t>(land),
                             static_cast<std::uint64_t>(atmo)));
    }
  }
}

void DatabaseBuilder::add(const MatchedSample& input) {
  if (finished_) throw InternalError("builder already finished");
  ++stats_.seen;

  validate_sample(input, channel_count_);
  if (!seen_ids_.insert(input.sample_id).second)
    throw DataError("duplicate sample id " + std::to_string(input.sample_id) +
                    " in build stream");

  if (!input.rate.has_value()) {
    ++stats_.excluded_no_rate;
    return;
  }

  MatchedSample s = input;
  if (s.precipitating()) {
    if (!s.active_phase.has_value() || !s.passive_prob.has_value()) {
      ++stats_.excluded_no_products;
      return;
    }
    // The REF label is derived here even when the stream carries one; the
    // merge rule is authoritative for database content.
    s.ref_phase = merge_ref_phase(*s.active_phase, *s.passive_prob,
                                  ref_threshold_);
  } else {
    s.ref_phase.reset();
  }

  const LandSurfaceClass land = land_of(s);
  const AtmosphericClass atmo = atmo_of(s);
  auto& r = reservoirs_[static_cast<size_t>(land)][static_cast<size_t>(atmo)];
  ++stats_.offered;
  ++r.offered;
  if (r.capacity == 0) return;
  if (static_cast<int>(r.pool.size()) < r.capacity) {
    r.pool.push_back(std::move(s));
    return;
  }
  // Algorithm R: the n-th offer replaces a pool slot with probability cap/n.
  const std::uint64_t j = uniform_below(r.rng, r.offered);
  if (j < static_cast<std::uint64_t>(r.capacity))
    r.pool[static_cast<size_t>(j)] = std::move(s);
}

AprioriDatabase DatabaseBuilder::finish() {
  if (finished_) throw InternalError("builder already finished");
  finished_ = true;

  std::string shortfalls;
  for (int land = 0; land < kNumLandClasses; ++land) {
    for (int atmo = 0; atmo < kNumAtmoClasses; ++atmo) {
      const auto& r =
          reservoirs_[static_cast<size_t>(land)][static_cast<size_t>(atmo)];
      if (static_cast<int>(r.pool.size()) < r.capacity) {
        if (!shortfalls.empty()) shortfalls += "; ";
        shortfalls +=
            "stratum land=" +
            std::string(to_string(static_cast<LandSurfaceClass>(land))) +
            " atmo=" +
            std::string(to_string(static_cast<AtmosphericClass>(atmo))) +
            " has " + std::to_string(r.pool.size()) + " samples, needs " +
            std::to_string(r.capacity);
      }
    }
  }
  if (!shortfalls.empty())
    throw DataError("database build short of quota: " + shortfalls);

  AprioriDatabase db;
  db.channel_count = channel_count_;
  db.channel_order = channel_order_;
  db.target_size = database_size_;
  db.seed = seed_;
  db.ref_threshold = ref_threshold_;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"))
    db.creation_time = parse_int(sde, "SOURCE_DATE_EPOCH");
  for (int land = 0; land < kNumLandClasses; ++land) {
    for (int atmo = 0; atmo < kNumAtmoClasses; ++atmo) {
      auto& pool =
          reservoirs_[static_cast<size_t>(land)][static_cast<size_t>(atmo)]
              .pool;
      std::sort(pool.begin(), pool.end(),
                [](const MatchedSample& a, const MatchedSample& b) {
                  return a.sample_id < b.sample_id;
                });
      db.strata[static_cast<size_t>(land)][static_cast<size_t>(atmo)] =
          std::move(pool);
    }
  }
  db.rebuild_id_index();
  return db;
}

void persist_database(const AprioriDatabase& db, const std::string& path) {
  BinWriter w;
  w.u32(static_cast<std::uint32_t>(db.channel_count));
  w.u32(static_cast<std::uint32_t>(db.channel_order.size()));
  for (const auto& name : db.channel_order) w.str(name);
  w.u32(static_cast<std::uint32_t>(db.target_size));
  w.u64(db.seed);
  w.f64(db.ref_threshold);
  w.i64(db.creation_time);
  for (int land = 0; land < kNumLandClasses; ++land) {
    for (int atmo = 0; atmo < kNumAtmoClasses; ++atmo) {
      const auto& stratum =
          db.strata[static_cast<size_t>(land)][static_cast<size_t>(atmo)];
      w.tag("STRA");
      w.u8(static_cast<std::uint8_t>(land));
      w.u8(static_cast<std::uint8_t>(atmo));
      w.u64(stratum.size());
      for (const auto& s : stratum)
        write_sample_record(w, s, db.channel_count);
    }
  }
  w.write_file(path, PayloadKind::Database);
}

AprioriDatabase load_database(const std::string& path) {
  BinReader r(path, PayloadKind::Database);
  AprioriDatabase db;
  db.channel_count = static_cast<int>(r.u32());
  if (db.channel_count < 1 || db.channel_count > 4096)
    throw DataError("'" + path + "': channel count out of range");
  const std::uint32_t names = r.u32();
  if (static_cast<int>(names) != db.channel_count)
    throw DataError("'" + path + "': channel name count mismatch");
  for (std::uint32_t i = 0; i < names; ++i)
    db.channel_order.push_back(r.str());
  db.target_size = static_cast<int>(r.u32());
  db.seed = r.u64();
  db.ref_threshold = r.f64();
  db.creation_time = r.i64();
  for (int land = 0; land < kNumLandClasses; ++land) {
    for (int atmo = 0; atmo < kNumAtmoClasses; ++atmo) {
      r.expect_tag("STRA");
      if (r.u8() != static_cast<std::uint8_t>(land) ||
          r.u8() != static_cast<std::uint8_t>(atmo))
        throw DataError("'" + path + "': stratum sections out of order");
      const std::uint64_t count = r.u64();
      auto& stratum =
          db.strata[static_cast<size_t>(land)][static_cast<size_t>(atmo)];
      stratum.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        MatchedSample s = read_sample_record(r, db.channel_count);
        validate_sample(s, db.channel_count);
        if (land_of(s) != static_cast<LandSurfaceClass>(land))
          throw DataError("'" + path + "': sample " +
                          std::to_string(s.sample_id) +
                          " filed under the wrong land class");
        if (atmo_of(s) != static_cast<AtmosphericClass>(atmo))
          throw DataError("'" + path + "': sample " +
                          std::to_string(s.sample_id) +
                          " filed under the wrong atmospheric class");
        if (!stratum.empty() && stratum.back().sample_id >= s.sample_id)
          throw DataError("'" + path + "': stratum not sorted by sample id");
        stratum.push_back(std::move(s));
      }
    }
  }
  r.expect_end();
  db.rebuild_id_index();
  return db;
}

}  // namespace nestknn
