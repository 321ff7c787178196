#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "daosim/errors.hpp"
#include "daosim/types.hpp"

namespace daosim::kv {

/// Dump/exchange unit used by persistence, snapshots and container load.
/// kind Write with epoch 0 is a snapshot base record (below all transactions).
/// kind Punch encodes its scope through empty keys: dkey empty = object scope,
/// akey empty = dkey scope.
struct Record {
  enum Kind : std::uint8_t { Write = 0, Punch = 1 };

  ObjectId oid;
  Key dkey;
  Key akey;
  Extent extent;
  Bytes payload;
  std::uint32_t crc = 0;
  Epoch epoch = 0;
  Kind kind = Write;
};

struct KeyListing {
  Key dkey;
  std::vector<Key> akeys;
};

/// Per-target versioned key-array store. All writes are kept tagged by epoch;
/// a fetch at epoch e merges per byte with latest-epoch-wins (ingestion order
/// breaks ties within one epoch), and a punch tombstone at epoch p shadows
/// every write with epoch <= p for reads at epochs >= p.
///
/// Not internally synchronized: a TargetStore is only ever driven through its
/// target's serial service queue. Fetch results are independent copies.
class TargetStore {
 public:
  /// Same-epoch overlapping writes to one key are reported here before being
  /// resolved by ingestion order.
  using ConflictLog = std::function<void(const ExtentWrite&)>;

  void update(const ExtentWrite& write);
  FetchResult fetch(const ObjectId& oid, const Key& dkey, const Key& akey,
                    const Extent& extent, Epoch read_epoch) const;
  void punch(const ObjectId& oid, PunchScope scope, const Key& dkey,
             const Key& akey, Epoch epoch);
  std::vector<KeyListing> list(const ObjectId& oid, Epoch read_epoch) const;

  /// Flattens all history with epoch <= upto into merged visible runs stamped
  /// epoch = upto. Reads at epochs >= upto are unchanged; history below the
  /// horizon is destroyed. Returns payload bytes reclaimed.
  std::uint64_t aggregate(const std::optional<ObjectId>& oid_filter, Epoch upto);

  /// Expunges every trace of one epoch (transaction abort path).
  void erase_epoch(Epoch epoch);

  /// All records with epoch <= upto, in deterministic (oid, dkey, akey,
  /// epoch, ingestion) order. Base runs come out as epoch-0 Write records.
  std::vector<Record> scan(Epoch upto) const;

  /// Visible state at `upto` as epoch-0 base records (snapshot seeding).
  std::vector<Record> flatten(Epoch upto) const;

  /// Re-inserts a scanned record. Epoch-0 writes become base runs. The
  /// payload checksum is verified.
  void ingest(const Record& record);

  bool empty() const { return objects_.empty(); }
  std::uint64_t stored_payload_bytes() const;

  /// Testing hook: flips one bit of a stored payload at rest, leaving the
  /// recorded checksum untouched. write_index counts the key's versioned
  /// writes in ingestion order. Returns false if nothing matched.
  bool corrupt_stored_bit(const ObjectId& oid, const Key& dkey, const Key& akey,
                          std::size_t write_index, std::size_t byte_index,
                          unsigned bit);

  /// Corrupts the newest stored write overlapping `extent` (fault injection).
  bool corrupt_newest_overlapping(const ObjectId& oid, const Key& dkey,
                                  const Key& akey, const Extent& extent);

  void set_conflict_log(ConflictLog log) { conflict_log_ = std::move(log); }

 private:
  struct StoredWrite {
    Extent extent;
    Bytes payload;
    std::uint32_t crc = 0;
    Epoch epoch = 0;
    std::uint64_t seq = 0;
  };

  struct BaseRun {
    std::uint64_t offset = 0;
    Bytes payload;
    std::uint32_t crc = 0;
  };

  struct AkeyEntry {
    std::vector<BaseRun> base;       // snapshot seed, below all epochs
    std::vector<StoredWrite> writes; // ingestion order
    std::vector<Epoch> punches;
  };

  struct DkeyEntry {
    std::map<Key, AkeyEntry> akeys;
    std::vector<Epoch> punches;
  };

  struct ObjectEntry {
    std::map<Key, DkeyEntry> dkeys;
    std::vector<Epoch> punches;
  };

  /// Largest punch epoch <= read_epoch applicable to (oid, dkey, akey);
  /// -1 when none.
  static std::int64_t max_tombstone(const ObjectEntry& obj, const DkeyEntry& dk,
                                    const AkeyEntry& ak, Epoch read_epoch);

  struct Merged {
    Bytes bytes;
    std::vector<std::uint8_t> present;
  };
  /// Merged visible bytes of one akey over [0, limit) at read_epoch.
  Merged merge_key(const ObjectEntry& obj, const DkeyEntry& dk,
                   const AkeyEntry& ak, std::uint64_t limit,
                   Epoch read_epoch) const;

  bool key_alive(const ObjectEntry& obj, const DkeyEntry& dk,
                 const AkeyEntry& ak, Epoch read_epoch) const;

  std::map<ObjectId, ObjectEntry> objects_;
  std::uint64_t next_seq_ = 1;
  ConflictLog conflict_log_;
};

}  // namespace daosim::kv
