#include "io/columnar.hpp"

#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "core/text.hpp"
#include "core/time.hpp"
#include "io/envelope.hpp"

namespace nestknn {

namespace {

constexpr int kTrailingColumns = 11;  // id + trailing fields besides tb

std::optional<PhaseLabel> parse_opt_phase(std::string_view text) {
  text = trim(text);
  if (text == "-") return std::nullopt;
  return parse_phase(text);
}

std::string opt_phase_text(const std::optional<PhaseLabel>& p) {
  return p ? std::string(to_string(*p)) : "-";
}

std::int64_t parse_timestamp(std::string_view text) {
  text = trim(text);
  // ISO-8601 in canonical files; bare integer seconds also accepted.
  if (text.find('T') != std::string_view::npos ||
      text.find('-') != std::string_view::npos)
    return parse_iso8601(text);
  return parse_int(text, "timestamp");
}

SampleFile read_samples_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");

  SampleFile file;
  bool header_seen = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto ctx = [&]() { return path + ":" + std::to_string(lineno); };
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      if (starts_with(sv, "#channels=")) {
        if (header_seen)
          throw DataError(ctx() + ": duplicate #channels header");
        auto body = sv.substr(1);
        for (auto field : split(body, ';')) {
          auto [k, v] = split_key_value(field, ctx());
          if (k == "channels") {
            auto n = parse_int(v, "channel count");
            if (n < 1 || n > 4096)
              throw DataError(ctx() + ": channel count out of range");
            file.channel_count = static_cast<int>(n);
          } else if (k == "order") {
            for (auto name : split(v, ','))
              file.channel_order.emplace_back(trim(name));
          } else {
            throw DataError(ctx() + ": unknown header field '" +
                            std::string(k) + "'");
          }
        }
        if (file.channel_count == 0)
          throw DataError(ctx() + ": header lacks channels=N");
        if (file.channel_order.empty()) {
          for (int i = 1; i <= file.channel_count; ++i)
            file.channel_order.push_back("ch" + std::string(i < 10 ? "0" : "") +
                                         std::to_string(i));
        }
        if (static_cast<int>(file.channel_order.size()) != file.channel_count)
          throw DataError(ctx() + ": order lists " +
                          std::to_string(file.channel_order.size()) +
                          " names for " + std::to_string(file.channel_count) +
                          " channels");
        header_seen = true;
      }
      continue;
    }
    if (!header_seen)
      throw DataError(ctx() + ": data before #channels header");

    auto fields = split(sv, ',');
    const int expected = file.channel_count + kTrailingColumns;
    if (static_cast<int>(fields.size()) != expected)
      throw DataError(ctx() + ": expected " + std::to_string(expected) +
                      " columns, got " + std::to_string(fields.size()));
    try {
      MatchedSample s;
      size_t i = 0;
      s.sample_id = parse_uint(fields[i++], "sample_id");
      s.tb.reserve(static_cast<size_t>(file.channel_count));
      for (int c = 0; c < file.channel_count; ++c)
        s.tb.push_back(parse_double(fields[i++], "tb"));
      s.rate = parse_opt_double(fields[i++], "rate");
      s.active_phase = parse_opt_phase(fields[i++]);
      s.passive_prob = parse_opt_double(fields[i++], "passive_prob");
      s.ref_phase = parse_opt_phase(fields[i++]);
      s.snow_fraction = parse_double(fields[i++], "snow_fraction");
      s.skin_temp = parse_opt_double(fields[i++], "skin_temp");
      s.air_temp = parse_opt_double(fields[i++], "air_temp");
      s.lat = parse_double(fields[i++], "lat");
      s.lon = parse_double(fields[i++], "lon");
      s.timestamp = parse_timestamp(fields[i++]);
      file.samples.push_back(std::move(s));
    } catch (const DataError& e) {
      throw DataError(ctx() + ": " + e.what());
    }
  }
  if (!header_seen) throw DataError(path + ": missing #channels header");
  return file;
}

SampleFile read_samples_binary(const std::string& path) {
  BinReader r(path, PayloadKind::Samples);
  SampleFile file;
  file.channel_count = static_cast<int>(r.u32());
  if (file.channel_count < 1 || file.channel_count > 4096)
    throw DataError("'" + path + "': channel count out of range");
  const std::uint32_t names = r.u32();
  if (static_cast<int>(names) != file.channel_count)
    throw DataError("'" + path + "': channel name count mismatch");
  for (std::uint32_t i = 0; i < names; ++i)
    file.channel_order.push_back(r.str());
  const std::uint64_t count = r.u64();
  file.samples.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n)
    file.samples.push_back(read_sample_record(r, file.channel_count));
  r.expect_end();
  return file;
}

}  // namespace

void write_sample_record(BinWriter& w, const MatchedSample& s,
                         int channel_count) {
  if (static_cast<int>(s.tb.size()) != channel_count)
    throw DataError("sample " + std::to_string(s.sample_id) +
                    ": tb size does not match file channel count");
  w.u64(s.sample_id);
  for (double v : s.tb) w.f64(v);
  std::uint8_t flags = 0;
  if (s.rate) flags |= 0x01;
  if (s.active_phase) flags |= 0x02;
  if (s.passive_prob) flags |= 0x04;
  if (s.ref_phase) flags |= 0x08;
  if (s.skin_temp) flags |= 0x10;
  if (s.air_temp) flags |= 0x20;
  w.u8(flags);
  if (s.rate) w.f64(*s.rate);
  if (s.active_phase) w.u8(static_cast<std::uint8_t>(*s.active_phase));
  if (s.passive_prob) w.f64(*s.passive_prob);
  if (s.ref_phase) w.u8(static_cast<std::uint8_t>(*s.ref_phase));
  w.f64(s.snow_fraction);
  if (s.skin_temp) w.f64(*s.skin_temp);
  if (s.air_temp) w.f64(*s.air_temp);
  w.f64(s.lat);
  w.f64(s.lon);
  w.i64(s.timestamp);
}

MatchedSample read_sample_record(BinReader& r, int channel_count) {
  MatchedSample s;
  s.sample_id = r.u64();
  s.tb.resize(static_cast<size_t>(channel_count));
  for (auto& v : s.tb) v = r.f64();
  const std::uint8_t flags = r.u8();
  auto phase = [&]() {
    std::uint8_t code = r.u8();
    if (code > 2) throw DataError("bad phase code in binary record");
    return static_cast<PhaseLabel>(code);
  };
  if (flags & 0x01) s.rate = r.f64();
  if (flags & 0x02) s.active_phase = phase();
  if (flags & 0x04) s.passive_prob = r.f64();
  if (flags & 0x08) s.ref_phase = phase();
  s.snow_fraction = r.f64();
  if (flags & 0x10) s.skin_temp = r.f64();
  if (flags & 0x20) s.air_temp = r.f64();
  s.lat = r.f64();
  s.lon = r.f64();
  s.timestamp = r.i64();
  return s;
}

std::string opt_double_text(const std::optional<double>& v) {
  return v ? format_double(*v) : "-";
}

std::optional<double> parse_opt_double(std::string_view text,
                                       std::string_view what) {
  text = trim(text);
  if (text == "-") return std::nullopt;
  return parse_double(text, what);
}

SampleFile read_samples(const std::string& path) {
  if (BinReader::looks_binary(path)) return read_samples_binary(path);
  return read_samples_text(path);
}

void write_samples_text(const std::string& path, const SampleFile& file) {
  if (static_cast<int>(file.channel_order.size()) != file.channel_count)
    throw InternalError("sample file: channel order size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create '" + path + "'");

  out << "#channels=" << file.channel_count << ";order=";
  for (size_t i = 0; i < file.channel_order.size(); ++i) {
    if (i) out << ',';
    out << file.channel_order[i];
  }
  out << '\n';

  for (const auto& s : file.samples) {
    if (static_cast<int>(s.tb.size()) != file.channel_count)
      throw DataError("sample " + std::to_string(s.sample_id) +
                      ": tb size does not match file channel count");
    out << s.sample_id;
    for (double v : s.tb) out << ',' << format_double(v);
    out << ',' << opt_double_text(s.rate);
    out << ',' << opt_phase_text(s.active_phase);
    out << ',' << opt_double_text(s.passive_prob);
    out << ',' << opt_phase_text(s.ref_phase);
    out << ',' << format_double(s.snow_fraction);
    out << ',' << opt_double_text(s.skin_temp);
    out << ',' << opt_double_text(s.air_temp);
    out << ',' << format_double(s.lat);
    out << ',' << format_double(s.lon);
    out << ',' << format_iso8601(s.timestamp);
    out << '\n';
  }
  if (!out) throw DataError("write failure on '" + path + "'");
}

void write_samples_binary(const std::string& path, const SampleFile& file) {
  if (static_cast<int>(file.channel_order.size()) != file.channel_count)
    throw InternalError("sample file: channel order size mismatch");
  BinWriter w;
  w.u32(static_cast<std::uint32_t>(file.channel_count));
  w.u32(static_cast<std::uint32_t>(file.channel_order.size()));
  for (const auto& name : file.channel_order) w.str(name);
  w.u64(file.samples.size());
  for (const auto& s : file.samples)
    write_sample_record(w, s, file.channel_count);
  w.write_file(path, PayloadKind::Samples);
}

}  // namespace nestknn
