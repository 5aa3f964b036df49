#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"

namespace nestknn {

// Sample corpus with its channel layout. Text and binary carriers hold the
// same information; read_samples() sniffs which one it was handed.
struct SampleFile {
  int channel_count = 0;
  std::vector<std::string> channel_order;
  std::vector<MatchedSample> samples;
};

// Text layout, one record per line, comma-delimited, "-" for absent
// optionals, ISO-8601 UTC timestamps:
//   #channels=N;order=name1,...,nameN
//   sample_id, tb*N, rate, active_phase, passive_prob, ref_phase,
//   snow_fraction, skin_temp, air_temp, lat, lon, timestamp
SampleFile read_samples(const std::string& path);
void write_samples_text(const std::string& path, const SampleFile& file);
void write_samples_binary(const std::string& path, const SampleFile& file);

// Shared by other text writers: "-" when absent.
std::string opt_double_text(const std::optional<double>& v);
std::optional<double> parse_opt_double(std::string_view text,
                                       std::string_view what);

class BinWriter;
class BinReader;

// Binary record codec shared between sample files and the database payload.
void write_sample_record(BinWriter& w, const MatchedSample& s,
                         int channel_count);
MatchedSample read_sample_record(BinReader& r, int channel_count);

}  // namespace nestknn
