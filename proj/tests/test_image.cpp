#include "daosim/image.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "daosim/crc32c.hpp"
#include "daosim/errors.hpp"
#include "doctest.h"

using namespace daosim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = fs::temp_directory_path() / ("daosim-imgtest-" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

kv::Record write_record(ObjectId oid, Key dkey, Key akey, std::uint64_t off,
                        Bytes payload, Epoch epoch) {
  kv::Record r;
  r.oid = oid;
  r.dkey = std::move(dkey);
  r.akey = std::move(akey);
  r.extent = {off, payload.size()};
  r.crc = crc32c(payload);
  r.payload = std::move(payload);
  r.epoch = epoch;
  r.kind = kv::Record::Write;
  return r;
}

kv::Record punch_record(ObjectId oid, Key dkey, Key akey, Epoch epoch) {
  kv::Record r;
  r.oid = oid;
  r.dkey = std::move(dkey);
  r.akey = std::move(akey);
  r.extent = {0, 0};
  r.epoch = epoch;
  r.kind = kv::Record::Punch;
  return r;
}

image::Image sample_image() {
  image::Image img;
  img.container_id = Uuid::parse("0f0e0d0c-0b0a-0908-0706-050403020100");
  img.committed_version = 7;
  img.records.push_back(
      write_record(make_object_id(1, 2, 3), "dk", "ak", 16, bytes_of("hello"), 3));
  img.records.push_back(
      write_record(make_object_id(0, 0, 9), "DATA", "RAW", 0, bytes_of("x"), 0));
  img.records.push_back(punch_record(make_object_id(1, 2, 3), "dk", {}, 5));
  img.records.push_back(punch_record(make_object_id(1, 2, 3), {}, {}, 6));
  return img;
}

Bytes slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST_CASE("image round-trips bit-exactly") {
  TempDir dir;
  const auto img = sample_image();
  image::write(dir.file("a.img"), img);
  const auto back = image::read(dir.file("a.img"));
  CHECK(back.container_id == img.container_id);
  CHECK(back.committed_version == img.committed_version);
  REQUIRE(back.records.size() == img.records.size());
  for (std::size_t i = 0; i < img.records.size(); ++i) {
    CHECK(back.records[i].oid == img.records[i].oid);
    CHECK(back.records[i].dkey == img.records[i].dkey);
    CHECK(back.records[i].akey == img.records[i].akey);
    CHECK(back.records[i].extent.offset == img.records[i].extent.offset);
    CHECK(back.records[i].extent.length == img.records[i].extent.length);
    CHECK(back.records[i].payload == img.records[i].payload);
    CHECK(back.records[i].epoch == img.records[i].epoch);
    CHECK(back.records[i].kind == img.records[i].kind);
  }
  // byte-determinism: writing the same image twice yields identical files
  image::write(dir.file("b.img"), img);
  CHECK(slurp(dir.file("a.img")) == slurp(dir.file("b.img")));
}

TEST_CASE("image header layout is fixed little-endian") {
  TempDir dir;
  image::Image img;
  img.container_id = Uuid::parse("00112233-4455-6677-8899-aabbccddeeff");
  img.committed_version = 0x0102030405060708ull;
  image::write(dir.file("h.img"), img);
  const Bytes raw = slurp(dir.file("h.img"));
  REQUIRE(raw.size() >= 38);
  CHECK(raw[0] == 'D');
  CHECK(raw[1] == 'C');
  CHECK(raw[2] == 'S');
  CHECK(raw[3] == 'F');
  CHECK(raw[4] == 1);  // format version u16 LE
  CHECK(raw[5] == 0);
  CHECK(raw[6] == 0x00);  // uuid bytes in order
  CHECK(raw[7] == 0x11);
  CHECK(raw[21] == 0xff);
  CHECK(raw[22] == 0x08);  // committed_version LE
  CHECK(raw[29] == 0x01);
  for (int i = 30; i < 38; ++i) CHECK(raw[i] == 0);  // record count 0
  // trailer: CRC-32C of everything after the magic
  const std::uint32_t trailer = std::uint32_t(raw[raw.size() - 4]) |
                                std::uint32_t(raw[raw.size() - 3]) << 8 |
                                std::uint32_t(raw[raw.size() - 2]) << 16 |
                                std::uint32_t(raw[raw.size() - 1]) << 24;
  CHECK(trailer == crc32c(raw.data() + 4, raw.size() - 8));
}

TEST_CASE("every single-bit corruption of the file is detected") {
  TempDir dir;
  image::write(dir.file("c.img"), sample_image());
  const Bytes good = slurp(dir.file("c.img"));
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 64; ++trial) {
    Bytes bad = good;
    const std::size_t byte = rng() % bad.size();
    bad[byte] ^= std::uint8_t(1u << (rng() % 8));
    spit(dir.file("bad.img"), bad);
    CHECK_THROWS_AS((void)image::read(dir.file("bad.img")), Error);
    CHECK_FALSE(image::fsck(dir.file("bad.img")).ok);
  }
}

TEST_CASE("malformed images are rejected with BadImage") {
  TempDir dir;

  SUBCASE("truncation") {
    image::write(dir.file("t.img"), sample_image());
    const Bytes good = slurp(dir.file("t.img"));
    for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{20},
                             good.size() - 5}) {
      spit(dir.file("t.img"), Bytes(good.begin(), good.begin() + keep));
      try {
        (void)image::read(dir.file("t.img"));
        FAIL("expected failure at keep=", keep);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::BadImage);
      }
    }
  }

  SUBCASE("wrong magic") {
    image::write(dir.file("m.img"), sample_image());
    Bytes raw = slurp(dir.file("m.img"));
    raw[0] = 'X';
    spit(dir.file("m.img"), raw);
    try {
      (void)image::read(dir.file("m.img"));
      FAIL("expected BadImage");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::BadImage);
    }
  }

  SUBCASE("unknown format version") {
    image::write(dir.file("v.img"), sample_image());
    Bytes raw = slurp(dir.file("v.img"));
    raw[4] = 9;
    // keep the trailer honest so the version check itself is exercised
    const std::uint32_t crc = crc32c(raw.data() + 4, raw.size() - 8);
    raw[raw.size() - 4] = std::uint8_t(crc);
    raw[raw.size() - 3] = std::uint8_t(crc >> 8);
    raw[raw.size() - 2] = std::uint8_t(crc >> 16);
    raw[raw.size() - 1] = std::uint8_t(crc >> 24);
    spit(dir.file("v.img"), raw);
    CHECK_THROWS_AS((void)image::read(dir.file("v.img")), Error);
  }

  SUBCASE("absent file is an I/O error") {
    try {
      (void)image::read(dir.file("nope.img"));
      FAIL("expected IoError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::IoError);
    }
  }
}

TEST_CASE("fsck reports identity and problems") {
  TempDir dir;
  const auto img = sample_image();
  image::write(dir.file("f.img"), img);

  SUBCASE("clean image") {
    const auto rep = image::fsck(dir.file("f.img"));
    CHECK(rep.ok);
    CHECK(rep.container_id == img.container_id);
    CHECK(rep.committed_version == 7);
    CHECK(rep.records == img.records.size());
    CHECK(rep.problems.empty());
  }

  SUBCASE("payload corruption names a problem but still reads the header") {
    Bytes raw = slurp(dir.file("f.img"));
    raw[raw.size() - 30] ^= 0x40;  // somewhere in the record area
    spit(dir.file("f.img"), raw);
    const auto rep = image::fsck(dir.file("f.img"));
    CHECK_FALSE(rep.ok);
    CHECK(rep.container_id == img.container_id);
    REQUIRE(!rep.problems.empty());
  }
}

TEST_CASE("atomic write leaves no temp files and keeps the old image on failure") {
  TempDir dir;
  image::write(dir.file("x.img"), sample_image());
  std::size_t entries = 0;
  for (auto it = fs::directory_iterator(dir.path);
       it != fs::directory_iterator(); ++it)
    ++entries;
  CHECK(entries == 1);

  // writing into a non-existent directory fails without touching anything
  image::Image img = sample_image();
  CHECK_THROWS_AS(image::write((dir.path / "no" / "dir.img").string(), img),
                  Error);
  CHECK(fs::exists(dir.file("x.img")));
}
