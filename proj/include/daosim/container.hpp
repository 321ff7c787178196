#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "daosim/cluster.hpp"
#include "daosim/image.hpp"

namespace daosim::cont {

enum class Mode { ReadOnly, ReadWrite };

class Pool;
class Container;
class ContainerHandle;

/// One started (or attached) transaction. All updates carry its number as
/// their epoch; nothing becomes readable until the committed version crosses
/// that number.
class TxContext {
 public:
  TxContext() = default;

  Epoch number() const noexcept { return n_; }
  bool valid() const noexcept { return container_ != nullptr; }

  void update(ObjectId oid, const Key& dkey, const Key& akey,
              const Extent& extent, Bytes payload);
  void punch(ObjectId oid, PunchScope scope, const Key& dkey = {},
             const Key& akey = {});
  void finish();
  void abort();

 private:
  friend class ContainerHandle;
  TxContext(std::shared_ptr<Container> c, std::uint64_t handle, Epoch n)
      : container_(std::move(c)), handle_(handle), n_(n) {}

  std::shared_ptr<Container> container_;
  std::uint64_t handle_ = 0;
  Epoch n_ = 0;
};

/// Access token for one container. Copies share the same underlying handle;
/// close() invalidates them all. Every operation is tagged with this handle
/// and an epoch.
class ContainerHandle {
 public:
  ContainerHandle() = default;

  bool valid() const noexcept { return container_ != nullptr; }
  Uuid container_id() const;
  Mode mode() const noexcept { return mode_; }

  TxContext tx_start(Epoch n);
  /// Joins an already-open transaction (cross-handle writes gate on the
  /// ledger, not on handles).
  TxContext tx_attach(Epoch n);
  void tx_skip(Epoch n);
  /// Convenience for middleware that wants automatic numbering.
  Epoch next_tx() const;

  Epoch version() const;
  FetchResult read_at(Epoch version, ObjectId oid, const Key& dkey,
                      const Key& akey, const Extent& extent) const;
  std::vector<kv::KeyListing> list_at(Epoch version, ObjectId oid) const;

  /// Writes the container image atomically; returns the image path.
  std::string persist(Epoch version);
  Uuid snapshot(Epoch version, const std::string& name);
  std::uint64_t aggregate(Epoch upto);

  void close();

 private:
  friend class Pool;
  friend class Container;
  ContainerHandle(std::shared_ptr<Container> c, std::uint64_t id, Mode mode)
      : container_(std::move(c)), id_(id), mode_(mode) {}

  std::shared_ptr<Container> container_;
  std::uint64_t id_ = 0;
  Mode mode_ = Mode::ReadOnly;
};

/// An object address space inside a pool: the unit of atomicity, versioning
/// and snapshotting. Transactions may finish in any order but commit in
/// strict numerical sequence; the committed version is the largest N with
/// every transaction 1..=N finished, aborted or skipped.
class Container : public std::enable_shared_from_this<Container> {
 public:
  enum class TxState : std::uint8_t {
    Open,
    AbortPending,  // closed to writes, expunge in progress
    Finished,
    Aborted,
    Skipped,
  };

  const Uuid& id() const noexcept { return id_; }
  const std::string& name() const noexcept { return name_; }

 private:
  friend class Pool;
  friend class ContainerHandle;
  friend class TxContext;

  Container(Pool* pool, Uuid id, std::string name)
      : pool_(pool), id_(id), name_(std::move(name)) {}

  // All ledger mutations and version reads go through mu_.
  void check_handle(std::uint64_t handle) const;
  void tx_begin(std::uint64_t handle, Epoch n, bool attach);
  void tx_complete(std::uint64_t handle, Epoch n, bool aborted);
  void tx_skip(std::uint64_t handle, Epoch n);
  /// Brackets one routed write so abort cannot expunge the epoch while the
  /// write is still travelling through the fabric.
  void inflight_begin(std::uint64_t handle, Epoch n);
  void inflight_end(Epoch n) noexcept;
  Epoch next_tx_locked() const;
  void recompute_committed_locked();
  bool tx_number_used_locked(Epoch n) const;

  cluster::ObjectLayout layout_of(ObjectId oid) const;

  Pool* pool_;
  Uuid id_;
  std::string name_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  Epoch committed_ = 0;
  Epoch persisted_upto_ = 0;
  Epoch used_through_ = 0;  // reload consumes 1..=used_through_
  std::map<Epoch, TxState> ledger_;
  std::map<Epoch, std::uint32_t> inflight_;  // routed writes not yet applied
  std::map<std::string, Uuid> snapshots_;
  std::optional<Epoch> image_version_;

  std::uint64_t next_handle_ = 1;
  std::map<std::uint64_t, Mode> handles_;
};

/// A set of storage targets hosting containers, with an optional backing
/// directory for persistence (manifest + one image file per container).
class Pool : public std::enable_shared_from_this<Pool> {
 public:
  static std::shared_ptr<Pool> create(std::uint32_t n_targets,
                                      const std::string& dir = {},
                                      std::uint64_t request_cost = 1);
  /// Process-local lookup by pool id; UnknownPool when absent.
  static std::shared_ptr<Pool> connect(const Uuid& pool_id);
  /// Reopens a pool directory: manifest plus container images.
  static std::shared_ptr<Pool> load(const std::string& dir);

  ~Pool();
  Pool(const Pool&) = delete;
  Pool& operator=(const Pool&) = delete;

  const Uuid& id() const noexcept { return id_; }
  const std::string& dir() const noexcept { return dir_; }
  std::uint32_t n_targets() const noexcept { return fabric_.n_targets(); }
  cluster::Cluster& fabric() noexcept { return fabric_; }

  Uuid container_create(const std::string& name);
  ContainerHandle container_open(const std::string& name, Mode mode);
  void container_delete(const std::string& name);
  bool has_container(const std::string& name) const;
  std::vector<std::string> container_names() const;

  /// Registers an externally supplied image under `name` (CLI `container
  /// load`). The image is CRC-verified during read.
  Uuid container_load_image(const std::string& image_path,
                            const std::string& name);

 private:
  friend class Container;
  friend class ContainerHandle;
  friend class TxContext;

  Pool(Uuid id, std::uint32_t n_targets, std::string dir,
       std::uint64_t request_cost);

  std::string image_path(const Uuid& container_id) const;
  void save_manifest() const;  // no-op without a backing directory
  std::shared_ptr<Container> find(const std::string& name) const;
  std::shared_ptr<Container> adopt_locked(const std::string& name, Uuid id);

  Uuid id_;
  std::string dir_;
  cluster::Cluster fabric_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Container>> containers_;
};

}  // namespace daosim::cont
