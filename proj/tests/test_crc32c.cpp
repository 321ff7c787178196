#include "daosim/crc32c.hpp"

#include <random>
#include <string>

#include "doctest.h"

using daosim::Bytes;
using daosim::crc32c;

namespace {

// Bit-at-a-time reference: reflected CRC-32C, shares nothing with the
// table-driven implementation under test.
std::uint32_t crc32c_bitwise(const std::uint8_t* data, std::size_t n,
                             std::uint32_t seed = 0) {
  std::uint32_t crc = ~seed;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= data[i];
    for (int k = 0; k < 8; ++k)
      crc = (crc >> 1) ^ (0x82F63B78u & (0u - (crc & 1u)));
  }
  return ~crc;
}

Bytes from_string(const std::string& s) {
  return Bytes(s.begin(), s.end());
}

}  // namespace

TEST_CASE("crc32c known vectors") {
  CHECK(crc32c(nullptr, 0) == 0x00000000u);
  const Bytes check = from_string("123456789");
  CHECK(crc32c(check.data(), check.size()) == 0xE3069283u);
  const Bytes a = from_string("a");
  CHECK(crc32c(a.data(), a.size()) == 0xC1D04330u);
  const Bytes ab = from_string("AB");
  CHECK(crc32c(ab.data(), ab.size()) == 0xBD9444EAu);
}

TEST_CASE("crc32c matches a bitwise reference on random buffers") {
  std::mt19937_64 rng(0xC5C5C5C5u);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = rng() % 300;
    Bytes buf(n);
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    CHECK(crc32c(buf.data(), buf.size()) == crc32c_bitwise(buf.data(), n));
  }
}

TEST_CASE("crc32c seed chaining splits anywhere") {
  std::mt19937_64 rng(7);
  Bytes buf(257);
  for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
  const std::uint32_t whole = crc32c(buf.data(), buf.size());
  for (std::size_t split : {std::size_t{0}, std::size_t{1}, std::size_t{100},
                            std::size_t{256}, buf.size()}) {
    const std::uint32_t head = crc32c(buf.data(), split);
    const std::uint32_t chained =
        crc32c(buf.data() + split, buf.size() - split, head);
    CHECK(chained == whole);
  }
}

TEST_CASE("crc32c detects single-bit flips") {
  Bytes buf = from_string("The quick brown fox jumps over the lazy dog");
  const std::uint32_t good = crc32c(buf.data(), buf.size());
  for (std::size_t byte = 0; byte < buf.size(); byte += 5) {
    for (int bit = 0; bit < 8; bit += 3) {
      buf[byte] ^= std::uint8_t(1u << bit);
      CHECK(crc32c(buf.data(), buf.size()) != good);
      buf[byte] ^= std::uint8_t(1u << bit);
    }
  }
  CHECK(crc32c(buf.data(), buf.size()) == good);
}
