#include "daosim/types.hpp"

#include <mutex>
#include <random>

#include "daosim/errors.hpp"

namespace daosim {

std::string Uuid::str() const {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(36);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
    out.push_back(hex[bytes[i] >> 4]);
    out.push_back(hex[bytes[i] & 0xF]);
  }
  return out;
}

Uuid Uuid::parse(std::string_view text) {
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Uuid u;
  std::size_t out = 0;
  int hi = -1;
  for (char c : text) {
    if (c == '-') continue;
    int v = nibble(c);
    if (v < 0 || out >= u.bytes.size())
      fail(Errc::BadConfig, "malformed uuid '" + std::string(text) + "'");
    if (hi < 0) {
      hi = v;
    } else {
      u.bytes[out++] = static_cast<std::uint8_t>((hi << 4) | v);
      hi = -1;
    }
  }
  if (out != u.bytes.size() || hi >= 0)
    fail(Errc::BadConfig, "malformed uuid '" + std::string(text) + "'");
  return u;
}

Uuid random_uuid() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  Uuid u;
  for (std::size_t i = 0; i < u.bytes.size(); i += 8) {
    std::uint64_t r = rng();
    for (std::size_t k = 0; k < 8; ++k)
      u.bytes[i + k] = static_cast<std::uint8_t>(r >> (8 * k));
  }
  u.bytes[6] = static_cast<std::uint8_t>(0x40 | (u.bytes[6] & 0x0F));  // version 4
  u.bytes[8] = static_cast<std::uint8_t>(0x80 | (u.bytes[8] & 0x3F));
  return u;
}

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::BadExtent: return "BadExtent";
    case Errc::BadKey: return "BadKey";
    case Errc::BadEpoch: return "BadEpoch";
    case Errc::UnknownPool: return "UnknownPool";
    case Errc::NameExists: return "NameExists";
    case Errc::UnknownContainer: return "UnknownContainer";
    case Errc::StaleHandle: return "StaleHandle";
    case Errc::DuplicateTransaction: return "DuplicateTransaction";
    case Errc::ReadOnlyHandle: return "ReadOnlyHandle";
    case Errc::TxNotOpen: return "TxNotOpen";
    case Errc::VersionNotCommitted: return "VersionNotCommitted";
    case Errc::NotPersisted: return "NotPersisted";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::AllReplicasFailed: return "AllReplicasFailed";
    case Errc::NotFound: return "NotFound";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::BadLayout: return "BadLayout";
    case Errc::TooLarge: return "TooLarge";
    case Errc::UnlimitedNotSlowest: return "UnlimitedNotSlowest";
    case Errc::UnknownDimension: return "UnknownDimension";
    case Errc::CollectiveRequired: return "CollectiveRequired";
    case Errc::VerifyFailed: return "VerifyFailed";
    case Errc::IoError: return "IoError";
    case Errc::BadImage: return "BadImage";
    case Errc::BadConfig: return "BadConfig";
  }
  return "UnknownError";
}

}  // namespace daosim
