#include "core/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "core/text.hpp"
#include "core/time.hpp"

namespace nestknn {

namespace fs = std::filesystem;

int land_index(LandSurfaceClass l) {
  return l == LandSurfaceClass::SnowCovered ? 0 : 1;
}

const WeightMatrix& RunConfig::stage_weights(int stage, int land) const {
  if (stage < 1 || stage > 3 || land < 0 || land > 1)
    throw InternalError("stage_weights: bad stage or land index");
  return weights[static_cast<size_t>(stage - 1)][static_cast<size_t>(land)];
}

std::vector<std::string> default_channel_names(int n) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(n));
  for (int i = 1; i <= n; ++i) {
    std::string s = "ch";
    if (i < 10) s += '0';
    s += std::to_string(i);
    names.push_back(std::move(s));
  }
  return names;
}

namespace {

std::vector<double> parse_number_list(std::string_view text,
                                      std::string_view what) {
  std::vector<double> out;
  for (auto piece : split(text, ',')) {
    piece = trim(piece);
    if (piece.empty())
      throw ConfigError(std::string(what) + ": empty entry in list");
    try {
      out.push_back(parse_double(piece, what));
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

WeightMatrix parse_weight_spec(std::string_view value, int dim,
                               const std::string& base_dir) {
  value = trim(value);
  if (value == "identity") return WeightMatrix::identity(dim);

  if (starts_with(value, "diag:")) {
    auto entries = parse_number_list(value.substr(5), "weight diagonal");
    if (static_cast<int>(entries.size()) != dim)
      throw ConfigError("weight diagonal has " +
                        std::to_string(entries.size()) +
                        " entries, expected " + std::to_string(dim));
    return WeightMatrix::diagonal(std::move(entries));
  }

  if (starts_with(value, "full:")) {
    std::vector<double> flat;
    auto rows = split(value.substr(5), ';');
    if (static_cast<int>(rows.size()) != dim)
      throw ConfigError("weight matrix has " + std::to_string(rows.size()) +
                        " rows, expected " + std::to_string(dim));
    for (auto row : rows) {
      auto entries = parse_number_list(row, "weight matrix row");
      if (static_cast<int>(entries.size()) != dim)
        throw ConfigError("weight matrix row has " +
                          std::to_string(entries.size()) +
                          " entries, expected " + std::to_string(dim));
      flat.insert(flat.end(), entries.begin(), entries.end());
    }
    return WeightMatrix::full(dim, std::move(flat));
  }

  if (starts_with(value, "file:")) {
    fs::path p(std::string(trim(value.substr(5))));
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    std::string text = read_file_text(p.string());
    // The file holds a single spec value, possibly wrapped over lines.
    std::string joined;
    for (auto line : split(text, '\n')) {
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      joined.append(line);
    }
    if (starts_with(joined, "file:"))
      throw ConfigError("weight file '" + p.string() +
                        "' may not chain to another file");
    return parse_weight_spec(joined, dim, p.parent_path().string());
  }

  throw ConfigError("weight spec '" + std::string(value) +
                    "': expected identity, diag:, full: or file:");
}

std::string weight_spec_string(const WeightMatrix& w) {
  std::string out;
  if (w.storage() == WeightMatrix::Storage::Diagonal) {
    bool ident = std::all_of(w.values().begin(), w.values().end(),
                             [](double v) { return v == 1.0; });
    if (ident) return "identity";
    out = "diag:";
    for (size_t i = 0; i < w.values().size(); ++i) {
      if (i) out += ',';
      out += format_double(w.values()[i]);
    }
    return out;
  }
  out = "full:";
  for (int i = 0; i < w.dim(); ++i) {
    if (i) out += ';';
    for (int j = 0; j < w.dim(); ++j) {
      if (j) out += ',';
      out += format_double(w.at(i, j));
    }
  }
  return out;
}

RunConfig default_config() {
  RunConfig c;
  c.channel_order = default_channel_names(c.channel_count);
  for (auto& per_stage : c.weights)
    for (auto& w : per_stage) w = WeightMatrix::identity(c.channel_count);
  return c;
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
  struct Entry {
    std::string key;
    std::string value;
    int line;
  };
  std::vector<Entry> entries;
  {
    int lineno = 0;
    for (auto raw : split(text, '\n')) {
      ++lineno;
      auto line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto [k, v] =
          split_key_value(line, origin + ":" + std::to_string(lineno));
      entries.push_back({std::string(k), std::string(v), lineno});
    }
  }

  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.key).second)
      throw ConfigError(origin + ":" + std::to_string(e.line) +
                        ": duplicate key '" + e.key + "'");
  }

  RunConfig c;
  auto fail = [&](const Entry& e, const std::string& msg) -> ConfigError {
    return ConfigError(origin + ":" + std::to_string(e.line) + ": " + e.key +
                       ": " + msg);
  };

  // channel_count drives weight validation, so resolve it first.
  for (const auto& e : entries) {
    if (e.key != "channel_count") continue;
    std::int64_t v;
    try {
      v = parse_int(e.value, "channel_count");
    } catch (const DataError& err) {
      throw fail(e, err.what());
    }
    if (v < 1 || v > 4096) throw fail(e, "must be in [1, 4096]");
    c.channel_count = static_cast<int>(v);
  }

  c.channel_order = default_channel_names(c.channel_count);
  for (auto& per_stage : c.weights)
    for (auto& w : per_stage) w = WeightMatrix::identity(c.channel_count);

  const std::string base_dir =
      fs::path(origin).has_parent_path() ? fs::path(origin).parent_path().string()
                                         : std::string();

  for (const auto& e : entries) {
    const std::string& key = e.key;
    const std::string& value = e.value;
    try {
      if (key == "channel_count") {
        continue;  // handled above
      } else if (key == "channels") {
        std::vector<std::string> names;
        for (auto piece : split(value, ',')) {
          auto p = trim(piece);
          if (p.empty()) throw ConfigError("empty channel name");
          names.emplace_back(p);
        }
        if (static_cast<int>(names.size()) != c.channel_count)
          throw ConfigError("lists " + std::to_string(names.size()) +
                            " names, channel_count is " +
                            std::to_string(c.channel_count));
        c.channel_order = std::move(names);
      } else if (key == "ref_threshold") {
        double v = parse_double(value, key);
        if (!(v > 0.0 && v < 1.0))
          throw ConfigError("must lie strictly inside (0,1)");
        c.ref_threshold = v;
      } else if (key == "database_size") {
        std::int64_t v = parse_int(value, key);
        if (v < 8) throw ConfigError("must be >= 8");
        c.database_size = static_cast<int>(v);
      } else if (key == "seed") {
        c.seed = parse_uint(value, key);
      } else if (key == "candidate_k") {
        std::vector<int> ks;
        for (auto piece : split(value, ',')) {
          std::int64_t v = parse_int(trim(piece), key);
          if (v < 1) throw ConfigError("candidate k must be >= 1");
          ks.push_back(static_cast<int>(v));
        }
        if (ks.empty()) throw ConfigError("needs at least one candidate");
        std::sort(ks.begin(), ks.end());
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        c.candidate_k = std::move(ks);
      } else if (starts_with(key, "weights.stage")) {
        // weights.stage<N>.<land>
        auto rest = std::string_view(key).substr(13);
        size_t dot = rest.find('.');
        if (dot == std::string_view::npos)
          throw ConfigError("expected weights.stage<N>.<snow|nosnow>");
        int stage = static_cast<int>(parse_int(rest.substr(0, dot), "stage"));
        if (stage < 1 || stage > 3) throw ConfigError("stage must be 1..3");
        LandSurfaceClass land = parse_land(rest.substr(dot + 1));
        c.weights[static_cast<size_t>(stage - 1)]
                 [static_cast<size_t>(land_index(land))] =
            parse_weight_spec(value, c.channel_count, base_dir);
      } else if (key == "window_start") {
        c.window_start = parse_iso8601(value);
      } else if (key == "window_end") {
        c.window_end = parse_iso8601(value);
      } else if (key == "season_strict") {
        auto v = to_lower(value);
        if (v == "true" || v == "1") c.season_strict = true;
        else if (v == "false" || v == "0") c.season_strict = false;
        else throw ConfigError("expected true or false");
      } else if (key == "grid_cell_deg") {
        double v = parse_double(value, key);
        if (!(v > 0.0 && v <= 90.0)) throw ConfigError("must be in (0, 90]");
        c.grid_cell_deg = v;
      } else if (key == "zonal_band_deg") {
        double v = parse_double(value, key);
        if (!(v > 0.0 && v <= 90.0)) throw ConfigError("must be in (0, 90]");
        c.zonal_band_deg = v;
      } else if (key == "wrf_ratio_mode") {
        auto v = to_lower(value);
        if (v == "fraction") c.wrf_ratio_mode = WrfRatioMode::Fraction;
        else if (v == "literal") c.wrf_ratio_mode = WrfRatioMode::Literal;
        else throw ConfigError("expected fraction or literal");
      } else if (key == "threads") {
        std::int64_t v = parse_int(value, key);
        if (v < 1 || v > 256) throw ConfigError("must be in [1, 256]");
        c.threads = static_cast<int>(v);
      } else {
        throw ConfigError("unknown key");
      }
    } catch (const ConfigError& err) {
      throw fail(e, err.what());
    } catch (const DataError& err) {
      throw fail(e, err.what());
    }
  }

  if (c.window_start && c.window_end && *c.window_end <= *c.window_start)
    throw ConfigError(origin + ": window_end must be after window_start");

  return c;
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_file_text(path), path);
}

}  // namespace nestknn
