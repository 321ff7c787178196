#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace daosim {

/// Transaction number and readable container version share one number line.
using Epoch = std::uint64_t;

using Bytes = std::vector<std::uint8_t>;

/// dkeys and akeys are opaque byte strings, 1..=256 bytes, compared bytewise.
using Key = std::string;

inline constexpr std::size_t kMaxKeyLen = 256;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

/// 128-bit object identifier. The top byte of `hi` carries the object class,
/// so the placement schema is decodable from the identifier alone.
struct ObjectId {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  std::uint8_t class_code() const noexcept {
    return static_cast<std::uint8_t>(hi >> 56);
  }

  auto operator<=>(const ObjectId&) const = default;
};

inline ObjectId make_object_id(std::uint8_t class_code, std::uint64_t hi_low56,
                               std::uint64_t lo) noexcept {
  return ObjectId{(static_cast<std::uint64_t>(class_code) << 56) |
                      (hi_low56 & 0x00FF'FFFF'FFFF'FFFFull),
                  lo};
}

/// Byte range within one akey's value array.
struct Extent {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  std::uint64_t end() const noexcept { return offset + length; }
};

/// One update as routed to a target: payload plus client-computed checksum.
struct ExtentWrite {
  ObjectId oid;
  Key dkey;
  Key akey;
  Extent extent;
  Bytes payload;
  std::uint32_t checksum = 0;
  Epoch epoch = 0;
};

enum class PunchScope : std::uint8_t { Object, Dkey, Akey };

/// Fetch result: merged bytes plus a hole map. present[i] == 0 marks a byte
/// that was never written (or is shadowed by a punch) — distinct from zero.
struct FetchResult {
  Bytes bytes;
  std::vector<std::uint8_t> present;
  std::uint32_t crc = 0;  // CRC-32C over visible bytes, in offset order

  bool all_present() const {
    for (auto p : present)
      if (!p) return false;
    return true;
  }
  bool all_holes() const {
    for (auto p : present)
      if (p) return false;
    return true;
  }
};

struct Uuid {
  std::array<std::uint8_t, 16> bytes{};

  auto operator<=>(const Uuid&) const = default;

  bool is_nil() const {
    for (auto b : bytes)
      if (b) return false;
    return true;
  }

  std::string str() const;
  static Uuid parse(std::string_view text);  // throws BadConfig on malformed input
};

Uuid random_uuid();

}  // namespace daosim
