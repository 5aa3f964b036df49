#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nestknn {

// Binary container shared by all persisted binary artifacts:
//   magic "APDB" | u16 version | u16 kind | payload | u64 fnv1a checksum
// Little-endian throughout. The version tag is validated before the checksum
// so a reader can distinguish "file from the future" from corruption.

inline constexpr std::uint16_t kEnvelopeVersion = 1;

enum class PayloadKind : std::uint16_t {
  Samples = 1,
  Database = 2,
  Grid = 3,
  Index = 4,
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::uint64_t file_checksum(const std::string& path);

class BinWriter {
public:
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void str(std::string_view s);  // u32 length + bytes
  void bytes(std::span<const std::uint8_t> b);
  void tag(const char (&t)[5]);  // 4-char section tag

  const std::vector<std::uint8_t>& payload() const { return buf_; }
  void write_file(const std::string& path, PayloadKind kind) const;

private:
  std::vector<std::uint8_t> buf_;
};

class BinReader {
public:
  // Loads, checks magic, version, checksum and kind, in that order.
  BinReader(const std::string& path, PayloadKind expected_kind);

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str();
  void expect_tag(const char (&t)[5]);
  bool at_end() const { return pos_ == buf_.size(); }
  void expect_end() const;

  static bool looks_binary(const std::string& path);

private:
  void need(size_t n) const;

  std::string path_;
  std::vector<std::uint8_t> buf_;  // payload only
  size_t pos_ = 0;
};

}  // namespace nestknn
