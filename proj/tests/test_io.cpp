#include <cstdint>
#include <vector>

#include "core/error.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "io/columnar.hpp"
#include "io/envelope.hpp"

using namespace nestknn;
using testutil::TempDir;

TEST_CASE("binary envelope round trips every scalar") {
  TempDir dir;
  const std::string path = dir.file("blob.bin");

  BinWriter w;
  w.tag("HDRX");
  w.u8(7);
  w.u16(65535);
  w.u32(123456789u);
  w.u64(0xdeadbeefcafef00dull);
  w.i64(-42);
  w.f64(89.99);
  w.str("channel one");
  std::vector<std::uint8_t> raw{1, 2, 3};
  w.bytes(raw);
  w.write_file(path, PayloadKind::Grid);

  BinReader r(path, PayloadKind::Grid);
  r.expect_tag("HDRX");
  CHECK(r.u8() == 7);
  CHECK(r.u16() == 65535);
  CHECK(r.u32() == 123456789u);
  CHECK(r.u64() == 0xdeadbeefcafef00dull);
  CHECK(r.i64() == -42);
  CHECK(r.f64() == 89.99);
  CHECK(r.str() == "channel one");
  CHECK(r.u8() == 1);
  CHECK(r.u8() == 2);
  CHECK(r.u8() == 3);
  CHECK(r.at_end());
  CHECK_NOTHROW(r.expect_end());
}

TEST_CASE("envelope rejects kind mismatch, tag mismatch and truncation") {
  TempDir dir;
  const std::string path = dir.file("blob.bin");
  BinWriter w;
  w.tag("GRID");
  w.u64(1);
  w.write_file(path, PayloadKind::Grid);

  CHECK_THROWS_AS(BinReader(path, PayloadKind::Database), DataError);
  {
    BinReader r(path, PayloadKind::Grid);
    CHECK_THROWS_AS(r.expect_tag("SMPL"), DataError);
  }
  {
    BinReader r(path, PayloadKind::Grid);
    r.expect_tag("GRID");
    CHECK_THROWS_AS(r.expect_end(), DataError);  // u64 still unread
  }

  // Flip one payload byte: checksum must catch it.
  std::string bytes = testutil::read_text(path);
  bytes[bytes.size() / 2] ^= 0x01;
  testutil::write_text(path, bytes);
  CHECK_THROWS_AS(BinReader(path, PayloadKind::Grid), DataError);

  // Truncation.
  testutil::write_text(path, bytes.substr(0, 6));
  CHECK_THROWS_AS(BinReader(path, PayloadKind::Grid), DataError);

  CHECK_THROWS_AS(BinReader(dir.file("missing.bin"), PayloadKind::Grid),
                  DataError);
}

TEST_CASE("file checksum is content addressed") {
  TempDir dir;
  testutil::write_text(dir.file("a.txt"), "hello\n");
  testutil::write_text(dir.file("b.txt"), "hello\n");
  testutil::write_text(dir.file("c.txt"), "hello!\n");
  CHECK(file_checksum(dir.file("a.txt")) == file_checksum(dir.file("b.txt")));
  CHECK(file_checksum(dir.file("a.txt")) != file_checksum(dir.file("c.txt")));
  CHECK_THROWS_AS(file_checksum(dir.file("nope.txt")), DataError);
}

TEST_CASE("binary sniffing tells carriers apart") {
  TempDir dir;
  BinWriter w;
  w.tag("SMPL");
  w.write_file(dir.file("x.bin"), PayloadKind::Samples);
  testutil::write_text(dir.file("x.txt"), "#channels=1;order=ch01\n");
  CHECK(BinReader::looks_binary(dir.file("x.bin")));
  CHECK_FALSE(BinReader::looks_binary(dir.file("x.txt")));
}

namespace {

SampleFile sample_corpus() {
  SampleFile f;
  f.channel_count = 3;
  f.channel_order = {"ch01", "ch02", "ch03"};
  auto a = testutil::make_sample(1, {200.5, 210.25, 190.125}, 2.5);
  a.active_phase = PhaseLabel::Solid;
  a.passive_prob = 0.25;
  a.ref_phase = PhaseLabel::Solid;
  a.snow_fraction = 0.75;
  a.skin_temp = 260.0;
  a.air_temp = 258.5;
  a.lat = 67.5;
  a.lon = -112.25;
  auto b = testutil::make_sample(2, {230.0, 231.0, 232.0}, 0.0);
  b.skin_temp.reset();
  b.air_temp.reset();
  auto c = testutil::make_sample(3, {150.0, 151.0, 152.0}, 1.0);
  c.rate.reset();  // query-style row: no truth at all
  c.active_phase.reset();
  c.passive_prob.reset();
  c.ref_phase.reset();
  f.samples = {a, b, c};
  return f;
}

void check_equal(const SampleFile& x, const SampleFile& y) {
  REQUIRE(x.samples.size() == y.samples.size());
  CHECK(x.channel_count == y.channel_count);
  CHECK(x.channel_order == y.channel_order);
  for (size_t i = 0; i < x.samples.size(); ++i) {
    const auto& a = x.samples[i];
    const auto& b = y.samples[i];
    CHECK(a.sample_id == b.sample_id);
    CHECK(a.tb == b.tb);
    CHECK(a.rate == b.rate);
    CHECK(a.active_phase == b.active_phase);
    CHECK(a.passive_prob == b.passive_prob);
    CHECK(a.ref_phase == b.ref_phase);
    CHECK(a.snow_fraction == b.snow_fraction);
    CHECK(a.skin_temp == b.skin_temp);
    CHECK(a.air_temp == b.air_temp);
    CHECK(a.lat == b.lat);
    CHECK(a.lon == b.lon);
    CHECK(a.timestamp == b.timestamp);
  }
}

}  // namespace

TEST_CASE("sample files round trip through text and binary") {
  TempDir dir;
  SampleFile f = sample_corpus();

  write_samples_text(dir.file("s.txt"), f);
  check_equal(read_samples(dir.file("s.txt")), f);

  write_samples_binary(dir.file("s.bin"), f);
  check_equal(read_samples(dir.file("s.bin")), f);

  // Bit-for-bit stable writers.
  write_samples_text(dir.file("s2.txt"), f);
  CHECK(file_checksum(dir.file("s.txt")) == file_checksum(dir.file("s2.txt")));
  write_samples_binary(dir.file("s2.bin"), f);
  CHECK(file_checksum(dir.file("s.bin")) == file_checksum(dir.file("s2.bin")));
}

TEST_CASE("empty sample files are readable") {
  TempDir dir;
  SampleFile f;
  f.channel_count = 2;
  f.channel_order = {"ch01", "ch02"};
  write_samples_text(dir.file("e.txt"), f);
  write_samples_binary(dir.file("e.bin"), f);
  CHECK(read_samples(dir.file("e.txt")).samples.empty());
  CHECK(read_samples(dir.file("e.bin")).samples.empty());
  CHECK(read_samples(dir.file("e.txt")).channel_count == 2);
}

TEST_CASE("malformed sample text names the line") {
  TempDir dir;
  testutil::write_text(dir.file("bad.txt"),
                       "#channels=2;order=ch01,ch02\n"
                       "1, 200, 210, 0, -, -, -, 0, -, -, 45, -100, "
                       "2015-06-01T00:00:00Z\n"
                       "2, 200, oops, 0, -, -, -, 0, -, -, 45, -100, "
                       "2015-06-01T00:00:00Z\n");
  CHECK_THROWS_WITH_AS(read_samples(dir.file("bad.txt")),
                       doctest::Contains("3"), DataError);

  testutil::write_text(dir.file("nohdr.txt"), "1, 2, 3\n");
  CHECK_THROWS_AS(read_samples(dir.file("nohdr.txt")), DataError);

  testutil::write_text(dir.file("short.txt"),
                       "#channels=2;order=ch01,ch02\n"
                       "1, 200, 210, 0\n");
  CHECK_THROWS_AS(read_samples(dir.file("short.txt")), DataError);
}

TEST_CASE("optional field text uses a dash") {
  CHECK(opt_double_text(std::nullopt) == "-");
  CHECK(opt_double_text(1.5) == "1.5");
  CHECK(parse_opt_double("-", "x") == std::nullopt);
  CHECK(parse_opt_double("2.25", "x") == 2.25);
}
