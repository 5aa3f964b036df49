#include "io/envelope.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "core/error.hpp"

namespace nestknn {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'D', 'B'};
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void append_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void append_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failure on '" + path + "'");
  return data;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = kFnvOffset;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t file_checksum(const std::string& path) {
  auto data = read_file_bytes(path);
  return fnv1a64(data);
}

void BinWriter::u8(std::uint8_t v) { buf_.push_back(v); }
void BinWriter::u16(std::uint16_t v) { append_u16(buf_, v); }

void BinWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void BinWriter::u64(std::uint64_t v) { append_u64(buf_, v); }

void BinWriter::i64(std::int64_t v) {
  append_u64(buf_, static_cast<std::uint64_t>(v));
}

void BinWriter::f64(double v) {
  append_u64(buf_, std::bit_cast<std::uint64_t>(v));
}

void BinWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void BinWriter::bytes(std::span<const std::uint8_t> b) {
  buf_.insert(buf_.end(), b.begin(), b.end());
}

void BinWriter::tag(const char (&t)[5]) {
  buf_.insert(buf_.end(), t, t + 4);
}

void BinWriter::write_file(const std::string& path, PayloadKind kind) const {
  std::vector<std::uint8_t> out;
  out.reserve(buf_.size() + 16);
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u16(out, kEnvelopeVersion);
  append_u16(out, static_cast<std::uint16_t>(kind));
  out.insert(out.end(), buf_.begin(), buf_.end());
  append_u64(out, fnv1a64(out));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot create '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failure on '" + path + "'");
}

BinReader::BinReader(const std::string& path, PayloadKind expected_kind)
    : path_(path) {
  auto data = read_file_bytes(path);
  if (data.size() < 16)
    throw DataError("'" + path + "': too short for a binary envelope");
  if (std::memcmp(data.data(), kMagic, 4) != 0)
    throw DataError("'" + path + "': not a binary envelope (bad magic)");
  const std::uint16_t version =
      static_cast<std::uint16_t>(data[4] | (data[5] << 8));
  if (version != kEnvelopeVersion)
    throw DataError("'" + path + "': unsupported format version " +
                    std::to_string(version));
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<std::uint64_t>(data[data.size() - 8 + i]) << (8 * i);
  const std::uint64_t computed =
      fnv1a64(std::span(data.data(), data.size() - 8));
  if (stored != computed)
    throw DataError("'" + path + "': checksum mismatch, file is corrupt");
  const std::uint16_t kind =
      static_cast<std::uint16_t>(data[6] | (data[7] << 8));
  if (kind != static_cast<std::uint16_t>(expected_kind))
    throw DataError("'" + path + "': wrong payload kind " +
                    std::to_string(kind) + ", expected " +
                    std::to_string(static_cast<int>(expected_kind)));
  buf_.assign(data.begin() + 8, data.end() - 8);
}

void BinReader::need(size_t n) const {
  if (pos_ + n > buf_.size())
    throw DataError("'" + path_ + "': truncated payload");
}

std::uint8_t BinReader::u8() {
  need(1);
  return buf_[pos_++];
}

std::uint16_t BinReader::u16() {
  need(2);
  std::uint16_t v =
      static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t BinReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t BinReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

std::int64_t BinReader::i64() { return static_cast<std::int64_t>(u64()); }

double BinReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinReader::str() {
  std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void BinReader::expect_tag(const char (&t)[5]) {
  need(4);
  if (std::memcmp(buf_.data() + pos_, t, 4) != 0)
    throw DataError("'" + path_ + "': missing section tag " + t);
  pos_ += 4;
}

void BinReader::expect_end() const {
  if (pos_ != buf_.size())
    throw DataError("'" + path_ + "': trailing bytes after payload");
}

bool BinReader::looks_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char head[4] = {0, 0, 0, 0};
  in.read(head, 4);
  return in.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0;
}

}  // namespace nestknn
