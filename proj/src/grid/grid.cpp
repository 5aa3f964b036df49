#include "grid/grid.hpp"

#include <cmath>
#include <fstream>

#include "core/error.hpp"
#include "core/text.hpp"
#include "core/time.hpp"
#include "io/envelope.hpp"

namespace nestknn {

std::string_view to_string(Season s) {
  return s == Season::Winter ? "winter" : "summer";
}

Season parse_season(std::string_view text) {
  if (text == "winter") return Season::Winter;
  if (text == "summer") return Season::Summer;
  throw ConfigError("unknown season '" + std::string(text) +
                    "' (expected winter or summer)");
}

double phase_index(PhaseLabel phase) {
  switch (phase) {
    case PhaseLabel::Liquid: return 0.0;
    case PhaseLabel::Mixed: return 0.5;
    case PhaseLabel::Solid: return 1.0;
  }
  throw InternalError("unhandled phase label");
}

Season season_of(std::int64_t timestamp) {
  const int month = month_of(timestamp);
  return (month >= 5 && month <= 10) ? Season::Summer : Season::Winter;
}

PhaseGrid::PhaseGrid(double cell_deg, GridMode mode,
                     std::optional<Season> season)
    : cell_deg_(cell_deg), mode_(mode), season_(season) {
  if (!(cell_deg > 0.0) || cell_deg > 180.0)
    throw ConfigError("grid cell size must lie in (0, 180] degrees");
  // nextafter keeps a divisor like 0.1 (inexact in binary) from producing an
  // extra row when 180/cell rounds just above an integer.
  rows_ = static_cast<std::uint64_t>(
              std::floor(std::nextafter(180.0, 0.0) / cell_deg)) +
          1;
  cols_ = static_cast<std::uint64_t>(
              std::floor(std::nextafter(360.0, 0.0) / cell_deg)) +
          1;
}

std::uint64_t PhaseGrid::row_of(double lat) const {
  if (!(lat >= -90.0 && lat <= 90.0))
    throw DataError("latitude out of range: " + format_double(lat));
  auto row =
      static_cast<std::uint64_t>(std::floor((lat + 90.0) / cell_deg_));
  if (row >= rows_) row = rows_ - 1;
  return row;
}

std::uint64_t PhaseGrid::col_of(double lon) const {
  if (!(lon >= -180.0 && lon <= 180.0))
    throw DataError("longitude out of range: " + format_double(lon));
  auto col =
      static_cast<std::uint64_t>(std::floor((lon + 180.0) / cell_deg_));
  if (col >= cols_) col = cols_ - 1;
  return col;
}

double PhaseGrid::lat_of_row(std::uint64_t row) const {
  return -90.0 + (static_cast<double>(row) + 0.5) * cell_deg_;
}

double PhaseGrid::lon_of_col(std::uint64_t col) const {
  return -180.0 + (static_cast<double>(col) + 0.5) * cell_deg_;
}

std::uint64_t PhaseGrid::key_of(std::uint64_t row, std::uint64_t col) const {
  return row * cols_ + col;
}

void PhaseGrid::add(double lat, double lon, double value) {
  if (!(value >= 0.0 && value <= 1.0))
    throw InternalError("grid values must lie in [0,1]");
  auto& cell = cells_[key_of(row_of(lat), col_of(lon))];
  cell.sum += value;
  ++cell.count;
}

std::optional<GridBounds> PhaseGrid::bounding_box() const {
  if (cells_.empty()) return std::nullopt;
  GridBounds b;
  b.row_min = b.col_min = UINT64_MAX;
  for (const auto& [key, cell] : cells_) {
    const auto r = row_of_key(key);
    const auto c = col_of_key(key);
    b.row_min = std::min(b.row_min, r);
    b.row_max = std::max(b.row_max, r);
    b.col_min = std::min(b.col_min, c);
    b.col_max = std::max(b.col_max, c);
  }
  return b;
}

void PhaseGrid::merge(const PhaseGrid& other) {
  if (cell_deg_ != other.cell_deg_ || mode_ != other.mode_ ||
      season_ != other.season_)
    throw DataError("grid merge: geometry or tag mismatch");
  for (const auto& [key, cell] : other.cells_) {
    auto& mine = cells_[key];
    mine.sum += cell.sum;
    mine.count += cell.count;
  }
}

void PhaseGrid::set_cell(std::uint64_t key, GridCell cell) {
  cells_[key] = cell;
}

PhaseGrid grid_accumulate(std::span<const Detection> detections,
                          double cell_deg, GridMode mode,
                          std::optional<Season> season,
                          const RunConfig& config) {
  PhaseGrid grid(cell_deg, mode, season);
  for (const auto& d : detections) {
    if (config.season_strict && config.window_start.has_value() &&
        config.window_end.has_value()) {
      if (d.timestamp < *config.window_start ||
          d.timestamp >= *config.window_end)
        throw DataError("timestamp outside the configured study window: " +
                        format_iso8601(d.timestamp));
    }
    if (season.has_value() && season_of(d.timestamp) != *season) continue;
    if (mode == GridMode::Phase) {
      if (!d.precipitating) continue;
      if (!d.phase.has_value())
        throw DataError("precipitating detection without a phase label (id " +
                        std::to_string(d.sample_id) + ")");
      grid.add(d.lat, d.lon, phase_index(*d.phase));
    } else {
      grid.add(d.lat, d.lon, d.precipitating ? 1.0 : 0.0);
    }
  }
  return grid;
}

std::vector<ZonalRow> zonal_mean(const PhaseGrid& grid, double band_deg) {
  if (!(band_deg > 0.0) || band_deg > 180.0)
    throw ConfigError("zonal band size must lie in (0, 180] degrees");
  const auto bands = static_cast<std::uint64_t>(std::floor(
                         std::nextafter(180.0, 0.0) / band_deg)) +
                     1;
  std::map<std::uint64_t, GridCell> acc;
  for (const auto& [key, cell] : grid.cells()) {
    const double center = grid.lat_of_row(grid.row_of_key(key));
    auto band =
        static_cast<std::uint64_t>(std::floor((center + 90.0) / band_deg));
    if (band >= bands) band = bands - 1;
    auto& a = acc[band];
    a.sum += cell.sum;
    a.count += cell.count;
  }
  std::vector<ZonalRow> rows;
  rows.reserve(acc.size());
  for (const auto& [band, a] : acc) {
    if (a.count == 0) continue;
    rows.push_back({-90.0 + (static_cast<double>(band) + 0.5) * band_deg,
                    a.mean(), a.count});
  }
  return rows;
}

PhaseGrid grid_difference(const PhaseGrid& g1, const PhaseGrid& g2) {
  if (g1.cell_deg() != g2.cell_deg() || g1.mode() != g2.mode())
    throw DataError("grid difference: geometry mismatch");
  // Season tags may differ (seasonal contrasts are the point); the result
  // carries no tag. Difference cells store the mean difference with count 1.
  PhaseGrid out(g1.cell_deg(), g1.mode(), std::nullopt);
  const auto& other = g2.cells();
  for (const auto& [key, cell] : g1.cells()) {
    const auto it = other.find(key);
    if (it == other.end()) continue;
    if (cell.count == 0 || it->second.count == 0) continue;
    out.set_cell(key, GridCell{cell.mean() - it->second.mean(), 1});
  }
  return out;
}

void write_grid_text(const std::string& path, const PhaseGrid& grid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");
  out << "# lat, lon, mean, count\n";
  for (const auto& [key, cell] : grid.cells()) {
    out << format_double(grid.lat_of_row(grid.row_of_key(key))) << ','
        << format_double(grid.lon_of_col(grid.col_of_key(key))) << ','
        << format_double(cell.mean()) << ',' << cell.count << '\n';
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

void write_grid_binary(const std::string& path, const PhaseGrid& grid) {
  BinWriter w;
  w.tag("GRID");
  w.f64(grid.cell_deg());
  w.u8(static_cast<std::uint8_t>(grid.mode()));
  w.u8(grid.season().has_value() ? 1 : 0);
  w.u8(grid.season().has_value() ? static_cast<std::uint8_t>(*grid.season())
                                 : 0);
  w.u64(grid.cells().size());
  for (const auto& [key, cell] : grid.cells()) {
    w.u64(key);
    w.f64(cell.sum);
    w.u64(cell.count);
  }
  w.write_file(path, PayloadKind::Grid);
}

PhaseGrid load_grid_binary(const std::string& path) {
  BinReader r(path, PayloadKind::Grid);
  r.expect_tag("GRID");
  const double cell_deg = r.f64();
  const std::uint8_t mode_code = r.u8();
  if (mode_code > 1)
    throw DataError(path + ": unknown grid mode " +
                    std::to_string(mode_code));
  const std::uint8_t has_season = r.u8();
  const std::uint8_t season_code = r.u8();
  if (has_season > 1 || season_code > 1)
    throw DataError(path + ": invalid season tag");
  std::optional<Season> season;
  if (has_season == 1) season = static_cast<Season>(season_code);

  PhaseGrid grid(cell_deg, static_cast<GridMode>(mode_code), season);
  const std::uint64_t n = r.u64();
  std::uint64_t prev_key = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t key = r.u64();
    if (i > 0 && key <= prev_key)
      throw DataError(path + ": grid cells out of order");
    prev_key = key;
    GridCell cell;
    cell.sum = r.f64();
    cell.count = r.u64();
    if (cell.count == 0 || !std::isfinite(cell.sum))
      throw DataError(path + ": invalid grid cell");
    grid.set_cell(key, cell);
  }
  r.expect_end();
  return grid;
}

void write_zonal_text(const std::string& path,
                      std::span<const ZonalRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");
  out << "# band_center, mean, count\n";
  for (const auto& row : rows) {
    out << format_double(row.band_center_lat) << ','
        << format_double(row.mean) << ',' << row.count << '\n';
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

}  // namespace nestknn
