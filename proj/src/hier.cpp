#include "daosim/hier.hpp"

#include <algorithm>
#include <set>

#include "daosim/crc32c.hpp"
#include "daosim/wire.hpp"

namespace daosim::hier {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r))
    fail(Errc::TooLarge, "dataset addressing overflows 64 bits");
  return r;
}

std::uint64_t product(const std::vector<std::uint64_t>& v) {
  std::uint64_t p = 1;
  for (std::uint64_t x : v) p = checked_mul(p, x);
  return p;
}

void validate_name(const std::string& name) {
  if (name.empty() || name.size() > kMaxKeyLen - 2 ||
      name.find('/') != std::string::npos)
    fail(Errc::BadKey, "invalid object name '" + name + "'");
}

void validate_slab(const DatasetMeta& meta, const Hyperslab& slab) {
  const std::size_t nd = meta.dims.size();
  if (slab.offset.size() != nd || slab.count.size() != nd)
    fail(Errc::OutOfBounds, "hyperslab rank disagrees with dataspace");
  for (std::size_t i = 0; i < nd; ++i) {
    if (slab.offset[i] > meta.dims[i] ||
        slab.count[i] > meta.dims[i] - slab.offset[i])
      fail(Errc::OutOfBounds, "hyperslab leaves the dataspace in dimension " +
                                  std::to_string(i));
  }
}

std::uint64_t slab_bytes(const DatasetMeta& meta, const Hyperslab& slab) {
  return checked_mul(product(slab.count), meta.element_size);
}

}  // namespace

std::vector<Piece> decompose(const DatasetMeta& meta, const Hyperslab& slab) {
  const std::size_t nd = meta.dims.size();
  const std::uint64_t esize = meta.element_size;
  std::vector<Piece> out;

  if (nd == 0) {
    out.push_back(Piece{kDataDkey, Extent{0, esize}, 0});
    return out;
  }
  for (std::uint64_t c : slab.count)
    if (c == 0) return out;

  const std::size_t last = nd - 1;
  // row-major element strides over the dataspace and (chunked) over one chunk
  std::vector<std::uint64_t> dstride(nd, 1);
  for (std::size_t i = nd - 1; i-- > 0;)
    dstride[i] = checked_mul(dstride[i + 1], meta.dims[i + 1]);
  std::vector<std::uint64_t> cstride(nd, 1);
  if (meta.layout.kind == DatasetLayout::Chunked)
    for (std::size_t i = nd - 1; i-- > 0;)
      cstride[i] = checked_mul(cstride[i + 1], meta.layout.chunk_dims[i + 1]);

  std::vector<std::uint64_t> idx(nd, 0);  // odometer over count[0..last)
  std::uint64_t src_row = 0;              // slab elements before this row
  const std::uint64_t row_len = slab.count[last];

  while (true) {
    if (meta.layout.kind == DatasetLayout::Contiguous) {
      std::uint64_t lin = slab.offset[last];
      for (std::size_t i = 0; i < last; ++i)
        lin += checked_mul(slab.offset[i] + idx[i], dstride[i]);
      out.push_back(Piece{kDataDkey,
                          Extent{checked_mul(lin, esize),
                                 checked_mul(row_len, esize)},
                          static_cast<std::size_t>(checked_mul(src_row, esize))});
    } else {
      const auto& chunk = meta.layout.chunk_dims;
      std::uint64_t a = slab.offset[last];
      const std::uint64_t end = a + row_len;
      while (a < end) {
        const std::uint64_t cl = a / chunk[last];
        const std::uint64_t b = std::min(end, (cl + 1) * chunk[last]);
        std::string dkey;
        std::uint64_t intra = a - cl * chunk[last];
        for (std::size_t i = 0; i < last; ++i) {
          const std::uint64_t c = slab.offset[i] + idx[i];
          const std::uint64_t cc = c / chunk[i];
          dkey += std::to_string(cc);
          dkey += '.';
          intra += checked_mul(c - cc * chunk[i], cstride[i]);
        }
        dkey += std::to_string(cl);
        out.push_back(
            Piece{std::move(dkey),
                  Extent{checked_mul(intra, esize), checked_mul(b - a, esize)},
                  static_cast<std::size_t>(checked_mul(
                      src_row + (a - slab.offset[last]), esize))});
        a = b;
      }
    }

    // advance the odometer over the leading dimensions
    std::size_t i = last;
    while (i-- > 0) {
      if (++idx[i] < slab.count[i]) break;
      idx[i] = 0;
    }
    src_row += row_len;
    bool done = true;
    for (std::size_t k = 0; k < last; ++k)
      if (idx[k] != 0) {
        done = false;
        break;
      }
    if (last == 0 || done) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// File lifecycle

File File::create(cont::Pool& pool, const std::string& name) {
  pool.container_create(name);
  File f(pool.container_open(name, cont::Mode::ReadWrite));
  auto tx = f.handle_.tx_start(1);
  tx.update(kRootOid, kMetaDkey, kTypeAkey, Extent{0, 1}, Bytes{'G'});
  tx.update(kRootOid, kMetaDkey, kNextOidAkey, Extent{0, 8}, wire::u64le(2));
  tx.finish();
  f.next_oid_ = 2;
  return f;
}

File File::open(cont::Pool& pool, const std::string& name, cont::Mode mode) {
  File f(pool.container_open(name, mode));
  const Epoch v = f.handle_.version();
  auto t = f.handle_.read_at(v, kRootOid, kMetaDkey, kTypeAkey, Extent{0, 1});
  if (!t.all_present() || t.bytes[0] != 'G')
    fail(Errc::BadConfig, "container '" + name + "' is not a hierarchical file");
  auto c = f.handle_.read_at(v, kRootOid, kMetaDkey, kNextOidAkey, Extent{0, 8});
  if (c.all_present()) f.next_oid_ = wire::get_u64(c.bytes.data());
  return f;
}

// ---------------------------------------------------------------------------
// Transactions

template <typename Fn>
void File::with_tx(Fn&& fn) {
  if (tx_) {
    fn(*tx_);
    return;
  }
  for (;;) {
    const Epoch n = handle_.next_tx();
    cont::TxContext tx;
    try {
      tx = handle_.tx_start(n);
    } catch (const Error& e) {
      if (e.code() == Errc::DuplicateTransaction) continue;  // raced, renumber
      throw;
    }
    try {
      fn(tx);
    } catch (...) {
      tx.abort();
      pending_clear();
      throw;
    }
    tx.finish();
    pending_clear();
    return;
  }
}

void File::tx_begin(Epoch n) {
  if (tx_)
    fail(Errc::DuplicateTransaction, "file already has an open transaction");
  tx_ = handle_.tx_start(n);
}

void File::tx_join(Epoch n) {
  if (tx_)
    fail(Errc::DuplicateTransaction, "file already has an open transaction");
  tx_ = handle_.tx_attach(n);
}

void File::tx_commit() {
  if (!tx_) fail(Errc::TxNotOpen, "no open transaction on this file");
  try {
    tx_->finish();
  } catch (...) {
    tx_.reset();
    pending_clear();
    throw;
  }
  tx_.reset();
  pending_clear();
}

void File::tx_abort() {
  if (!tx_) fail(Errc::TxNotOpen, "no open transaction on this file");
  try {
    tx_->abort();
  } catch (...) {
    tx_.reset();
    pending_clear();
    throw;
  }
  tx_.reset();
  pending_clear();
}

void File::tx_detach() {
  if (!tx_) fail(Errc::TxNotOpen, "no open transaction on this file");
  tx_.reset();
  pending_clear();
}

Epoch File::current_tx() const {
  if (!tx_) fail(Errc::TxNotOpen, "no open transaction on this file");
  return tx_->number();
}

void File::pending_clear() {
  pending_links_.clear();
  pending_meta_.clear();
  pending_attrs_.clear();
}

// ---------------------------------------------------------------------------
// Links and object allocation

ObjectId File::alloc_oid(cont::TxContext& tx, std::uint8_t class_code) {
  const std::uint64_t lo = next_oid_++;
  tx.update(kRootOid, kMetaDkey, kNextOidAkey, Extent{0, 8},
            wire::u64le(next_oid_));
  return make_object_id(class_code, 0, lo);
}

void File::link_put(cont::TxContext& tx, const Group& parent,
                    const std::string& name, const Link& link) {
  // this API only ever links freshly allocated objects, so the hierarchy
  // stays acyclic; refuse the two degenerate targets outright
  if (link.oid == parent.oid || link.oid == kRootOid)
    fail(Errc::BadConfig, "link would create a cycle");
  Bytes v;
  v.push_back(static_cast<std::uint8_t>(link.type));
  wire::put_u64(v, link.oid.hi);
  wire::put_u64(v, link.oid.lo);
  const Extent ext{0, v.size()};
  tx.update(parent.oid, kMetaDkey, std::string(kLinkPrefix) + name, ext,
            std::move(v));
  pending_links_[parent.oid][name] = link;
}

std::optional<File::Link> File::link_get(ObjectId parent,
                                         const std::string& name,
                                         Epoch version) const {
  if (tx_) {
    auto pi = pending_links_.find(parent);
    if (pi != pending_links_.end()) {
      auto ni = pi->second.find(name);
      if (ni != pi->second.end()) return ni->second;
    }
  }
  auto r = handle_.read_at(version, parent, kMetaDkey,
                           std::string(kLinkPrefix) + name, Extent{0, 17});
  if (!r.all_present()) return std::nullopt;
  Link l;
  l.type = static_cast<char>(r.bytes[0]);
  l.oid.hi = wire::get_u64(r.bytes.data() + 1);
  l.oid.lo = wire::get_u64(r.bytes.data() + 9);
  return l;
}

// ---------------------------------------------------------------------------
// Groups

Group File::group_create(const Group& parent, const std::string& name) {
  validate_name(name);
  if (link_get(parent.oid, name, read_version()))
    fail(Errc::NameExists, "'" + name + "' already exists in this group");
  Group g;
  with_tx([&](cont::TxContext& tx) {
    g.oid = alloc_oid(tx, 0);
    tx.update(g.oid, kMetaDkey, kTypeAkey, Extent{0, 1}, Bytes{'G'});
    link_put(tx, parent, name, Link{'G', g.oid});
  });
  return g;
}

Group File::group_open(const Group& parent, const std::string& name) const {
  auto l = link_get(parent.oid, name, read_version());
  if (!l) fail(Errc::NotFound, "no object named '" + name + "'");
  if (l->type != 'G') fail(Errc::NotFound, "'" + name + "' is not a group");
  return Group{l->oid};
}

// ---------------------------------------------------------------------------
// Datasets

Dataset File::dataset_create(const Group& parent, const std::string& name,
                             std::vector<std::uint64_t> dims,
                             std::uint64_t element_size, DatasetLayout layout) {
  validate_name(name);
  const std::size_t nd = dims.size();
  if (nd > kMaxDims)
    fail(Errc::BadLayout, "datasets support at most 4 dimensions");
  if (element_size == 0) fail(Errc::BadLayout, "element size must be positive");
  if (layout.kind == DatasetLayout::Chunked) {
    if (nd == 0) fail(Errc::BadLayout, "scalar datasets cannot be chunked");
    if (layout.chunk_dims.size() != nd)
      fail(Errc::BadLayout, "chunk rank disagrees with dataspace");
    for (std::size_t i = 0; i < nd; ++i) {
      if (layout.chunk_dims[i] == 0)
        fail(Errc::BadLayout, "chunk dimensions must be positive");
      if (dims[i] >= 1 && layout.chunk_dims[i] > dims[i])
        fail(Errc::BadLayout, "chunk exceeds the dataspace");
    }
  } else if (!layout.chunk_dims.empty()) {
    fail(Errc::BadLayout, "contiguous layout takes no chunk dimensions");
  }
  checked_mul(product(dims), element_size);  // address space must fit
  if (link_get(parent.oid, name, read_version()))
    fail(Errc::NameExists, "'" + name + "' already exists in this group");

  Dataset ds;
  ds.meta = DatasetMeta{std::move(dims), element_size, std::move(layout)};
  with_tx([&](cont::TxContext& tx) {
    const std::uint8_t cls =
        ds.meta.layout.kind == DatasetLayout::Chunked ? 1 : 0;
    ds.oid = alloc_oid(tx, cls);
    tx.update(ds.oid, kMetaDkey, kTypeAkey, Extent{0, 1}, Bytes{'D'});

    Bytes shape;
    shape.push_back(static_cast<std::uint8_t>(nd));
    for (std::uint64_t d : ds.meta.dims) wire::put_u64(shape, d);
    const Extent shape_ext{0, shape.size()};
    tx.update(ds.oid, kMetaDkey, kShapeAkey, shape_ext, std::move(shape));

    tx.update(ds.oid, kMetaDkey, kEsizeAkey, Extent{0, 8},
              wire::u64le(element_size));

    Bytes lay;
    lay.push_back(static_cast<std::uint8_t>(ds.meta.layout.kind));
    for (std::uint64_t c : ds.meta.layout.chunk_dims) wire::put_u64(lay, c);
    const Extent lay_ext{0, lay.size()};
    tx.update(ds.oid, kMetaDkey, kLayoutAkey, lay_ext, std::move(lay));

    link_put(tx, parent, name, Link{'D', ds.oid});
    pending_meta_[ds.oid] = ds.meta;
  });
  return ds;
}

DatasetMeta File::read_meta(ObjectId oid, Epoch version) const {
  auto head = handle_.read_at(version, oid, kMetaDkey, kShapeAkey, Extent{0, 1});
  if (!head.all_present())
    fail(Errc::NotFound, "dataset metadata is missing at this version");
  const std::size_t nd = head.bytes[0];
  if (nd > kMaxDims) fail(Errc::BadImage, "corrupt dataset shape");

  DatasetMeta meta;
  if (nd) {
    auto body =
        handle_.read_at(version, oid, kMetaDkey, kShapeAkey, Extent{1, 8 * nd});
    if (!body.all_present()) fail(Errc::BadImage, "truncated dataset shape");
    for (std::size_t i = 0; i < nd; ++i)
      meta.dims.push_back(wire::get_u64(body.bytes.data() + 8 * i));
  }

  auto es = handle_.read_at(version, oid, kMetaDkey, kEsizeAkey, Extent{0, 8});
  if (!es.all_present()) fail(Errc::BadImage, "missing element size");
  meta.element_size = wire::get_u64(es.bytes.data());

  auto lk = handle_.read_at(version, oid, kMetaDkey, kLayoutAkey, Extent{0, 1});
  if (!lk.all_present()) fail(Errc::BadImage, "missing dataset layout");
  if (lk.bytes[0] == DatasetLayout::Chunked) {
    auto cd =
        handle_.read_at(version, oid, kMetaDkey, kLayoutAkey, Extent{1, 8 * nd});
    if (!cd.all_present()) fail(Errc::BadImage, "truncated chunk dimensions");
    std::vector<std::uint64_t> chunk;
    for (std::size_t i = 0; i < nd; ++i)
      chunk.push_back(wire::get_u64(cd.bytes.data() + 8 * i));
    meta.layout = DatasetLayout::chunked(std::move(chunk));
  }
  return meta;
}

Dataset File::dataset_open(const Group& parent, const std::string& name) const {
  auto l = link_get(parent.oid, name, read_version());
  if (!l) fail(Errc::NotFound, "no object named '" + name + "'");
  if (l->type != 'D') fail(Errc::NotFound, "'" + name + "' is not a dataset");
  Dataset ds;
  ds.oid = l->oid;
  auto pm = pending_meta_.find(l->oid);
  ds.meta = pm != pending_meta_.end() && tx_ ? pm->second
                                             : read_meta(l->oid, read_version());
  return ds;
}

void File::dataset_write(const Dataset& ds, const Hyperslab& slab,
                         const Bytes& payload) {
  validate_slab(ds.meta, slab);
  const std::uint64_t want = slab_bytes(ds.meta, slab);
  if (payload.size() != want)
    fail(Errc::SizeMismatch, "payload is " + std::to_string(payload.size()) +
                                 " bytes, hyperslab needs " +
                                 std::to_string(want));
  if (want == 0) return;
  const auto pieces = decompose(ds.meta, slab);
  with_tx([&](cont::TxContext& tx) {
    for (const Piece& p : pieces) {
      auto first = payload.begin() + static_cast<std::ptrdiff_t>(p.src_offset);
      tx.update(ds.oid, p.dkey, kRawAkey, p.extent,
                Bytes(first, first + static_cast<std::ptrdiff_t>(p.extent.length)));
    }
  });
}

FetchResult File::dataset_read_at(Epoch version, const Dataset& ds,
                                  const Hyperslab& slab) const {
  validate_slab(ds.meta, slab);
  const std::uint64_t total = slab_bytes(ds.meta, slab);
  FetchResult out;
  out.bytes.assign(static_cast<std::size_t>(total), 0);
  out.present.assign(static_cast<std::size_t>(total), 0);
  if (total == 0) return out;
  for (const Piece& p : decompose(ds.meta, slab)) {
    auto r = handle_.read_at(version, ds.oid, p.dkey, kRawAkey, p.extent);
    std::copy(r.bytes.begin(), r.bytes.end(),
              out.bytes.begin() + static_cast<std::ptrdiff_t>(p.src_offset));
    std::copy(r.present.begin(), r.present.end(),
              out.present.begin() + static_cast<std::ptrdiff_t>(p.src_offset));
  }
  std::uint32_t crc = 0;
  for (std::size_t i = 0; i < out.bytes.size(); ++i)
    if (out.present[i]) crc = crc32c(&out.bytes[i], 1, crc);
  out.crc = crc;
  return out;
}

FetchResult File::dataset_read(const Dataset& ds, const Hyperslab& slab) const {
  return dataset_read_at(read_version(), ds, slab);
}

void File::dataset_extend(Dataset& ds, std::uint64_t new_dim0) {
  if (ds.meta.dims.empty())
    fail(Errc::BadLayout, "scalar datasets cannot grow");
  if (new_dim0 < ds.meta.dims[0])
    fail(Errc::OutOfBounds, "datasets only grow");
  if (new_dim0 == ds.meta.dims[0]) return;
  ds.meta.dims[0] = new_dim0;
  checked_mul(product(ds.meta.dims), ds.meta.element_size);
  with_tx([&](cont::TxContext& tx) {
    Bytes shape;
    shape.push_back(static_cast<std::uint8_t>(ds.meta.dims.size()));
    for (std::uint64_t d : ds.meta.dims) wire::put_u64(shape, d);
    const Extent ext{0, shape.size()};
    tx.update(ds.oid, kMetaDkey, kShapeAkey, ext, std::move(shape));
    pending_meta_[ds.oid] = ds.meta;
  });
}

// ---------------------------------------------------------------------------
// Attributes

void File::attr_write(ObjectId owner, const std::string& name,
                      const Bytes& value) {
  validate_name(name);
  if (value.size() > kMaxAttrLen)
    fail(Errc::TooLarge, "attribute values are capped at 64 KiB");
  Bytes buf;
  wire::put_u32(buf, static_cast<std::uint32_t>(value.size()));
  buf.insert(buf.end(), value.begin(), value.end());
  const Extent ext{0, buf.size()};
  with_tx([&](cont::TxContext& tx) {
    tx.update(owner, kMetaDkey, std::string(kAttrPrefix) + name, ext,
              std::move(buf));
    pending_attrs_[{owner, name}] = value;
  });
}

std::optional<Bytes> File::attr_fetch(Epoch version, ObjectId owner,
                                      const std::string& name) const {
  const std::string akey = std::string(kAttrPrefix) + name;
  auto head = handle_.read_at(version, owner, kMetaDkey, akey, Extent{0, 4});
  if (!head.all_present()) return std::nullopt;
  const std::uint32_t len = wire::get_u32(head.bytes.data());
  if (len == 0) return Bytes{};
  auto body = handle_.read_at(version, owner, kMetaDkey, akey, Extent{4, len});
  if (!body.all_present()) fail(Errc::BadImage, "truncated attribute value");
  return body.bytes;
}

Bytes File::attr_read_at(Epoch version, ObjectId owner,
                         const std::string& name) const {
  auto v = attr_fetch(version, owner, name);
  if (!v) fail(Errc::NotFound, "no attribute named '" + name + "'");
  return *v;
}

Bytes File::attr_read(ObjectId owner, const std::string& name) const {
  if (tx_) {
    auto it = pending_attrs_.find({owner, name});
    if (it != pending_attrs_.end()) return it->second;
  }
  return attr_read_at(read_version(), owner, name);
}

std::vector<std::string> File::attr_list(ObjectId owner) const {
  std::vector<std::string> out;
  for (const auto& listing : handle_.list_at(read_version(), owner)) {
    if (listing.dkey != kMetaDkey) continue;
    for (const auto& akey : listing.akeys)
      if (akey.rfind(kAttrPrefix, 0) == 0) out.push_back(akey.substr(2));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paths

ObjectId File::path_resolve_at(Epoch version, const std::string& path) const {
  if (path.empty() || path[0] != '/')
    fail(Errc::BadKey, "paths are absolute and start with '/'");
  ObjectId cur = kRootOid;
  if (path == "/") return cur;
  std::size_t pos = 1;
  while (pos <= path.size()) {
    const std::size_t next = path.find('/', pos);
    const std::string comp =
        path.substr(pos, next == std::string::npos ? next : next - pos);
    if (comp.empty()) fail(Errc::BadKey, "empty path component");
    auto r = handle_.read_at(version, cur, kMetaDkey,
                             std::string(kLinkPrefix) + comp, Extent{0, 17});
    if (!r.all_present())
      fail(Errc::NotFound, "no object at '" + path.substr(0, pos) + comp + "'");
    const char type = static_cast<char>(r.bytes[0]);
    const ObjectId child{wire::get_u64(r.bytes.data() + 1),
                         wire::get_u64(r.bytes.data() + 9)};
    if (next == std::string::npos) return child;
    if (type != 'G')
      fail(Errc::NotFound, "'" + comp + "' is not a group");
    cur = child;
    pos = next + 1;
  }
  fail(Errc::BadKey, "malformed path '" + path + "'");
}

ObjectId File::path_resolve(const std::string& path) const {
  return path_resolve_at(read_version(), path);
}

std::vector<std::string> File::list_paths_at(Epoch version) const {
  std::vector<std::string> out;
  std::set<ObjectId> visited;

  auto walk = [&](auto&& self, ObjectId oid, const std::string& prefix) -> void {
    if (!visited.insert(oid).second) return;
    for (const auto& listing : handle_.list_at(version, oid)) {
      if (listing.dkey != kMetaDkey) continue;
      for (const auto& akey : listing.akeys) {
        if (akey.rfind(kLinkPrefix, 0) != 0) continue;
        auto r = handle_.read_at(version, oid, kMetaDkey, akey, Extent{0, 17});
        if (!r.all_present()) continue;
        const std::string name = akey.substr(2);
        const std::string path = prefix + "/" + name;
        out.push_back(path);
        if (static_cast<char>(r.bytes[0]) == 'G')
          self(self, ObjectId{wire::get_u64(r.bytes.data() + 1),
                              wire::get_u64(r.bytes.data() + 9)},
               path);
      }
    }
  };
  walk(walk, kRootOid, "");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> File::list_paths() const {
  return list_paths_at(read_version());
}

}  // namespace daosim::hier
