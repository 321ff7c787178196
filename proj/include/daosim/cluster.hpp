#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "daosim/kvstore.hpp"

namespace daosim::cluster {

using TargetId = std::uint32_t;

/// Closed class table. Class 0: one target for the whole object. Class 1:
/// dkeys striped across targets. Class 2: dkey-striped with 2 replicas.
struct ObjectClass {
  std::uint8_t class_code = 0;
  std::uint32_t replication = 1;
  bool dkey_striped = false;
};

/// Throws UnknownClass for unassigned codes.
const ObjectClass& object_class(std::uint8_t class_code);

/// Deterministic placement function, generated at open from the identifier
/// and the pool's target count alone. Repeated opens are identical.
class ObjectLayout {
 public:
  ObjectLayout(ObjectId oid, std::uint32_t n_targets);

  const ObjectId& oid() const noexcept { return oid_; }
  std::uint32_t replication() const noexcept { return class_.replication; }

  /// Ordered replica list for one dkey.
  std::vector<TargetId> replicas(const Key& dkey) const;

  /// Primary target for one dkey.
  TargetId primary(const Key& dkey) const { return replicas(dkey).front(); }

 private:
  ObjectId oid_;
  ObjectClass class_;
  std::uint32_t n_targets_ = 1;
  TargetId object_target_ = 0;  // single-target classes
};

struct TargetStats {
  std::uint64_t requests = 0;       // client requests served (update/fetch/punch/list)
  std::uint64_t busy = 0;           // virtual ticks spent serving
  std::uint64_t max_depth = 0;      // peak queue depth (incl. in service)
  std::uint64_t data_requests = 0;  // requests on non-"META" dkeys
  std::uint64_t data_busy = 0;
  std::uint64_t bytes_in = 0;       // data payload bytes stored
  std::uint64_t bytes_out = 0;      // data payload bytes returned visible
  std::uint64_t fetch_fallbacks = 0;
};

enum class FaultKind { CorruptNext, DropTarget };

/// Simulated multi-target pool fabric. Each target serves requests strictly
/// one at a time in arrival order and accumulates synthetic virtual-time cost
/// per request; stores are per (container, target).
class Cluster {
 public:
  explicit Cluster(std::uint32_t n_targets, std::uint64_t request_cost = 1);

  std::uint32_t n_targets() const noexcept { return n_targets_; }
  std::uint64_t request_cost() const noexcept { return request_cost_; }

  ObjectLayout open_object(ObjectId oid) const {
    return ObjectLayout(oid, n_targets_);
  }

  /// Enqueued on every replica target. The client-side checksum is verified
  /// at the store; dropped targets are skipped (AllReplicasFailed when no
  /// replica is up).
  void route_update(const Uuid& container, const ObjectLayout& layout,
                    const ExtentWrite& write);

  /// Served from the first replica, falling back replica by replica on
  /// checksum failure or a dropped target. The merged result's checksum is
  /// re-verified at this boundary.
  FetchResult route_fetch(const Uuid& container, const ObjectLayout& layout,
                          const ObjectId& oid, const Key& dkey, const Key& akey,
                          const Extent& extent, Epoch read_epoch);

  void route_punch(const Uuid& container, const ObjectLayout& layout,
                   PunchScope scope, const Key& dkey, const Key& akey,
                   Epoch epoch);

  /// Merged key enumeration across all targets holding parts of the object.
  std::vector<kv::KeyListing> route_list(const Uuid& container,
                                         const ObjectLayout& layout,
                                         Epoch read_epoch) const;

  void inject_fault(TargetId target, FaultKind kind);
  void clear_faults(TargetId target);

  std::vector<TargetStats> queue_stats() const;

  /// Virtual makespan: the busiest target's accumulated service time.
  std::uint64_t virtual_elapsed() const;

  // Maintenance surfaces for the container layer. These run under the target
  // locks but are not metered as service requests.
  std::uint64_t aggregate(const Uuid& container,
                          const std::optional<ObjectId>& oid_filter,
                          Epoch upto);
  void erase_epoch(const Uuid& container, Epoch epoch);
  std::vector<kv::Record> scan_container(const Uuid& container, Epoch upto) const;
  std::vector<kv::Record> flatten_container(const Uuid& container, Epoch upto) const;
  void restore_container(const Uuid& container, const std::vector<kv::Record>& records);
  void drop_container(const Uuid& container);

  /// Testing hook; see TargetStore::corrupt_stored_bit. replica picks which
  /// replica's store to corrupt.
  bool corrupt_stored_bit(const Uuid& container, const ObjectLayout& layout,
                          const ObjectId& oid, const Key& dkey, const Key& akey,
                          std::uint32_t replica, std::size_t write_index,
                          std::size_t byte_index, unsigned bit);

 private:
  /// FIFO lock: requests are granted strictly in arrival order. lock()
  /// returns the queue depth at enqueue time, including the caller.
  class TicketLock {
   public:
    std::uint64_t lock();
    void unlock();
    std::uint64_t depth() const { return depth_.load(std::memory_order_relaxed); }

   private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t serving_ = 0;
    std::atomic<std::uint64_t> depth_{0};
  };

  struct Target {
    TicketLock queue;
    std::map<Uuid, kv::TargetStore> stores;
    TargetStats stats;
    bool dropped = false;
    bool corrupt_next = false;
  };

  /// Runs op with the target's queue held, metering cost and depth. Returns
  /// false (op not run, nothing metered beyond depth) if the target is down.
  template <typename Op>
  bool serve(Target& t, bool is_data, Op&& op) const;

  /// Unmetered exclusive access (maintenance, stats snapshots, faults).
  template <typename Op>
  void with_target(Target& t, Op&& op) const;

  kv::TargetStore& store_for(Target& t, const Uuid& container);

  std::uint32_t n_targets_;
  std::uint64_t request_cost_;
  mutable std::vector<std::unique_ptr<Target>> targets_;
};

}  // namespace daosim::cluster
