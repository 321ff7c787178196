#pragma once

#include <string>
#include <vector>

#include "daosim/kvstore.hpp"

namespace daosim::image {

/// Container image: the persist target. Little-endian throughout.
///   magic "DCSF" | format_version u16 = 1 | container UUID (16 B) |
///   committed_version u64 | record count u64 | records |
///   trailer CRC-32C of everything after the magic.
/// Record: oid (16 B) | dkey_len u16 | dkey | akey_len u16 | akey |
///   offset u64 | length u64 | epoch u64 | crc32 u32 | payload |
///   record_kind u8 (0 = write, 1 = punch).
struct Image {
  Uuid container_id;
  Epoch committed_version = 0;
  std::vector<kv::Record> records;
};

inline constexpr char kMagic[4] = {'D', 'C', 'S', 'F'};
inline constexpr std::uint16_t kFormatVersion = 1;

/// Atomic write: temp file in the same directory, then rename.
void write(const std::string& path, const Image& img);

/// Verifies magic, structure, trailer CRC and per-record payload CRCs.
/// Throws BadImage / ChecksumMismatch / IoError.
Image read(const std::string& path);

struct FsckReport {
  bool ok = false;
  Uuid container_id;
  Epoch committed_version = 0;
  std::size_t records = 0;
  std::vector<std::string> problems;
};

/// Like read(), but collects problems instead of throwing.
FsckReport fsck(const std::string& path);

}  // namespace daosim::image
