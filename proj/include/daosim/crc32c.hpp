#pragma once

#include <cstddef>
#include <cstdint>

#include "daosim/types.hpp"

namespace daosim {

/// CRC-32C (Castagnoli polynomial, reflected 0x82F63B78).
/// Incremental use: pass the previous result as `seed`.
std::uint32_t crc32c(const void* data, std::size_t len, std::uint32_t seed = 0) noexcept;

inline std::uint32_t crc32c(const Bytes& b, std::uint32_t seed = 0) noexcept {
  return crc32c(b.data(), b.size(), seed);
}

}  // namespace daosim
