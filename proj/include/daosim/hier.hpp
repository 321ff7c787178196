#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "daosim/container.hpp"

namespace daosim::hier {

/// Fixed identity of the root group; exists from file creation.
inline constexpr ObjectId kRootOid{0, 1};

inline constexpr char kMetaDkey[] = "META";  // reserved for object metadata
inline constexpr char kDataDkey[] = "DATA";  // contiguous layouts
inline constexpr char kRawAkey[] = "RAW";    // raw data cells
inline constexpr char kTypeAkey[] = "T";
inline constexpr char kShapeAkey[] = "shape";
inline constexpr char kEsizeAkey[] = "esize";
inline constexpr char kLayoutAkey[] = "layout";
inline constexpr char kNextOidAkey[] = "next_oid";
inline constexpr char kLinkPrefix[] = "L:";
inline constexpr char kAttrPrefix[] = "A:";

inline constexpr std::size_t kMaxDims = 4;
inline constexpr std::size_t kMaxAttrLen = 64 * 1024;

struct DatasetLayout {
  enum Kind : std::uint8_t { Contiguous = 0, Chunked = 1 };

  Kind kind = Contiguous;
  std::vector<std::uint64_t> chunk_dims;  // per dimension, Chunked only

  static DatasetLayout contiguous() { return {}; }
  static DatasetLayout chunked(std::vector<std::uint64_t> dims) {
    return {Chunked, std::move(dims)};
  }

  bool operator==(const DatasetLayout&) const = default;
};

struct DatasetMeta {
  std::vector<std::uint64_t> dims;  // empty = scalar (one element)
  std::uint64_t element_size = 1;
  DatasetLayout layout;

  bool operator==(const DatasetMeta&) const = default;
};

/// Per-dimension offset + count selecting a dense sub-block, row-major.
struct Hyperslab {
  std::vector<std::uint64_t> offset;
  std::vector<std::uint64_t> count;
};

struct Group {
  ObjectId oid;
};

struct Dataset {
  ObjectId oid;
  DatasetMeta meta;
};

/// One piece of a decomposed hyperslab: a contiguous extent under one data
/// dkey, taken from [src_offset, src_offset + extent.length) of the slab's
/// row-major payload buffer.
struct Piece {
  Key dkey;
  Extent extent;
  std::size_t src_offset = 0;
};

/// Pure address arithmetic: how a hyperslab maps onto data dkeys. Exposed for
/// tests; throws OutOfBounds / SizeMismatch-free (bounds checked by caller).
std::vector<Piece> decompose(const DatasetMeta& meta, const Hyperslab& slab);

/// Hierarchical file over one container. One actor per File at a time.
///
/// Transactions: by default every mutating call runs in its own automatically
/// numbered transaction. tx_begin/tx_join switch the File into explicit mode,
/// where all calls share the caller's transaction until tx_commit/tx_abort.
/// Objects created inside an open transaction are tracked in a handle-local
/// cache so they can be used before they become readable at a committed
/// version.
class File {
 public:
  static File create(cont::Pool& pool, const std::string& name);
  static File open(cont::Pool& pool, const std::string& name, cont::Mode mode);

  Group root() const { return Group{kRootOid}; }
  cont::ContainerHandle& handle() { return handle_; }
  Epoch version() const { return handle_.version(); }
  std::string persist() { return handle_.persist(handle_.version()); }

  void tx_begin(Epoch n);
  void tx_join(Epoch n);
  void tx_commit();
  void tx_abort();
  /// Releases an attached transaction without completing it (joiners detach,
  /// the owner finishes).
  void tx_detach();
  bool in_explicit_tx() const { return tx_.has_value(); }
  Epoch current_tx() const;

  Group group_create(const Group& parent, const std::string& name);
  Group group_open(const Group& parent, const std::string& name) const;

  Dataset dataset_create(const Group& parent, const std::string& name,
                         std::vector<std::uint64_t> dims,
                         std::uint64_t element_size, DatasetLayout layout);
  Dataset dataset_open(const Group& parent, const std::string& name) const;

  void dataset_write(const Dataset& ds, const Hyperslab& slab,
                     const Bytes& payload);
  FetchResult dataset_read(const Dataset& ds, const Hyperslab& slab) const;
  FetchResult dataset_read_at(Epoch version, const Dataset& ds,
                              const Hyperslab& slab) const;
  /// Grows the slowest-changing dimension (addresses of existing elements are
  /// stable under row-major order for both layouts).
  void dataset_extend(Dataset& ds, std::uint64_t new_dim0);

  void attr_write(ObjectId owner, const std::string& name, const Bytes& value);
  Bytes attr_read(ObjectId owner, const std::string& name) const;
  Bytes attr_read_at(Epoch version, ObjectId owner,
                     const std::string& name) const;
  std::vector<std::string> attr_list(ObjectId owner) const;

  ObjectId path_resolve(const std::string& path) const;
  ObjectId path_resolve_at(Epoch version, const std::string& path) const;
  /// Absolute paths of every object reachable from the root, sorted.
  std::vector<std::string> list_paths() const;
  std::vector<std::string> list_paths_at(Epoch version) const;

 private:
  struct Link {
    char type = 0;  // 'G' or 'D'
    ObjectId oid;
  };

  explicit File(cont::ContainerHandle handle) : handle_(std::move(handle)) {}

  template <typename Fn>
  void with_tx(Fn&& fn);

  ObjectId alloc_oid(cont::TxContext& tx, std::uint8_t class_code);
  void link_put(cont::TxContext& tx, const Group& parent,
                const std::string& name, const Link& link);
  std::optional<Link> link_get(ObjectId parent, const std::string& name,
                               Epoch version) const;
  DatasetMeta read_meta(ObjectId oid, Epoch version) const;
  std::optional<Bytes> attr_fetch(Epoch version, ObjectId owner,
                                  const std::string& name) const;
  void pending_clear();
  Epoch read_version() const { return handle_.version(); }

  cont::ContainerHandle handle_;
  std::optional<cont::TxContext> tx_;
  std::uint64_t next_oid_ = 2;  // lo counter; root holds lo = 1

  // visibility of uncommitted structure within this handle's open transaction
  std::map<ObjectId, std::map<std::string, Link>> pending_links_;
  std::map<ObjectId, DatasetMeta> pending_meta_;
  std::map<std::pair<ObjectId, std::string>, Bytes> pending_attrs_;
};

}  // namespace daosim::hier
