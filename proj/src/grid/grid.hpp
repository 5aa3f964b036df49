#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/types.hpp"
#include "detect/detector.hpp"

namespace nestknn {

enum class Season : std::uint8_t { Winter = 0, Summer = 1 };

std::string_view to_string(Season s);
Season parse_season(std::string_view text);

// Numeric phase encoding used for gridded and zonal averaging.
double phase_index(PhaseLabel phase);

// Whole-month seasons: Nov-Apr is Winter, May-Oct is Summer, any year.
Season season_of(std::int64_t timestamp);

// Phase grids average phase indices over precipitating detections only;
// occurrence grids average the 0/1 precipitation flag over every detection.
enum class GridMode : std::uint8_t { Phase = 0, Occurrence = 1 };

struct GridCell {
  double sum = 0.0;
  std::uint64_t count = 0;

  double mean() const { return sum / static_cast<double>(count); }
  bool operator==(const GridCell&) const = default;
};

struct GridBounds {
  std::uint64_t row_min = 0, row_max = 0, col_min = 0, col_max = 0;
};

// Sparse global plate-carree accumulator. Cells hold (sum, count) so merges
// are exact; phase indices are dyadic rationals, which keeps double sums
// independent of accumulation order. A cell with count 0 is simply absent,
// distinct from a present cell whose mean is 0.
class PhaseGrid {
 public:
  PhaseGrid(double cell_deg, GridMode mode, std::optional<Season> season);

  double cell_deg() const { return cell_deg_; }
  GridMode mode() const { return mode_; }
  std::optional<Season> season() const { return season_; }

  // floor((lat+90)/cell) and floor((lon+180)/cell); the exact upper edges
  // fold into the last row/column. Out-of-range coordinates are DataErrors.
  std::uint64_t row_of(double lat) const;
  std::uint64_t col_of(double lon) const;
  double lat_of_row(std::uint64_t row) const;  // cell center
  double lon_of_col(std::uint64_t col) const;

  void add(double lat, double lon, double value);

  // Accumulators keyed by row * column_count + column, ordered.
  const std::map<std::uint64_t, GridCell>& cells() const { return cells_; }
  std::uint64_t key_of(std::uint64_t row, std::uint64_t col) const;
  std::uint64_t row_of_key(std::uint64_t key) const { return key / cols_; }
  std::uint64_t col_of_key(std::uint64_t key) const { return key % cols_; }

  std::optional<GridBounds> bounding_box() const;

  // Adds the other grid's accumulators cell by cell. Geometry (cell size,
  // mode, season tag) must match exactly.
  void merge(const PhaseGrid& other);

  bool operator==(const PhaseGrid&) const = default;

  // Used by the loader, which reconstructs cells directly.
  void set_cell(std::uint64_t key, GridCell cell);

 private:
  double cell_deg_ = 0.0;
  GridMode mode_ = GridMode::Phase;
  std::optional<Season> season_;
  std::uint64_t rows_ = 0;
  std::uint64_t cols_ = 0;
  std::map<std::uint64_t, GridCell> cells_;
};

// Accumulates detections into a fresh grid. Phase mode: precipitating
// detections contribute their phase index, others are skipped. Occurrence
// mode: every detection contributes 1 or 0. A season filter drops
// detections from the other season. With season_strict and a configured
// window, out-of-window timestamps are DataErrors.
PhaseGrid grid_accumulate(std::span<const Detection> detections,
                          double cell_deg, GridMode mode,
                          std::optional<Season> season,
                          const RunConfig& config);

struct ZonalRow {
  double band_center_lat = 0.0;
  double mean = 0.0;
  std::uint64_t count = 0;
};

// Count-weighted mean over all cells whose center falls in each latitude
// band; empty bands are absent.
std::vector<ZonalRow> zonal_mean(const PhaseGrid& grid, double band_deg);

// Per-cell difference g1 - g2 where both grids have counts, absent
// elsewhere. Result cells carry count 1 and their sum holds the difference.
PhaseGrid grid_difference(const PhaseGrid& g1, const PhaseGrid& g2);

// Delimited text: lat, lon, mean, count (cell centers).
void write_grid_text(const std::string& path, const PhaseGrid& grid);

// Binary raster in the shared envelope, section tag GRID.
void write_grid_binary(const std::string& path, const PhaseGrid& grid);
PhaseGrid load_grid_binary(const std::string& path);

// Delimited text: band_center, mean, count.
void write_zonal_text(const std::string& path, std::span<const ZonalRow> rows);

}  // namespace nestknn
