#pragma once

#include <stdexcept>
#include <string>

namespace daosim {

enum class Errc {
  ChecksumMismatch,
  BadExtent,
  BadKey,
  BadEpoch,
  UnknownPool,
  NameExists,
  UnknownContainer,
  StaleHandle,
  DuplicateTransaction,
  ReadOnlyHandle,
  TxNotOpen,
  VersionNotCommitted,
  NotPersisted,
  UnknownClass,
  AllReplicasFailed,
  NotFound,
  OutOfBounds,
  SizeMismatch,
  BadLayout,
  TooLarge,
  UnlimitedNotSlowest,
  UnknownDimension,
  CollectiveRequired,
  VerifyFailed,
  IoError,
  BadImage,
  BadConfig,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace daosim
