#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/types.hpp"

namespace testutil {

// Scratch directory removed on scope exit; file() builds paths inside it.
class TempDir {
public:
  TempDir() {
    static std::atomic<std::uint64_t> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("nestknn_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Fully populated precipitating sample; tweak fields per test.
inline nestknn::MatchedSample make_sample(std::uint64_t id,
                                          std::vector<double> tb,
                                          double rate = 1.0) {
  nestknn::MatchedSample s;
  s.sample_id = id;
  s.tb = std::move(tb);
  s.rate = rate;
  if (rate > 0.0) {
    s.active_phase = nestknn::PhaseLabel::Liquid;
    s.passive_prob = 0.9;
    s.ref_phase = nestknn::PhaseLabel::Liquid;
  }
  s.snow_fraction = 0.0;
  s.skin_temp = 285.0;
  s.air_temp = 284.0;
  s.lat = 45.0;
  s.lon = -100.0;
  s.timestamp = 1433116800;  // 2015-06-01T00:00:00Z
  return s;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, int dim,
                                         double lo = 100.0,
                                         double hi = 300.0) {
  std::vector<double> v(static_cast<size_t>(dim));
  for (auto& x : v) x = nestknn::uniform_range(rng, lo, hi);
  return v;
}

}  // namespace testutil
