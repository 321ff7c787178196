#include "daosim/arraync.hpp"

#include <algorithm>

#include "daosim/wire.hpp"

namespace daosim::nc {

namespace {

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r))
    fail(Errc::TooLarge, "index range overflows 64 bits");
  return r;
}

}  // namespace

NcFile NcFile::create(cont::Pool& pool, const std::string& name) {
  return NcFile(hier::File::create(pool, name));
}

NcFile NcFile::open(cont::Pool& pool, const std::string& name, cont::Mode mode) {
  return NcFile(hier::File::open(pool, name, mode));
}

template <typename Fn>
void NcFile::group_tx(Fn&& fn) {
  if (hier_.in_explicit_tx()) {
    fn();
    return;
  }
  for (;;) {
    const Epoch n = hier_.handle().next_tx();
    try {
      hier_.tx_begin(n);
    } catch (const Error& e) {
      if (e.code() == Errc::DuplicateTransaction) continue;  // raced, renumber
      throw;
    }
    try {
      fn();
    } catch (...) {
      hier_.tx_abort();
      throw;
    }
    hier_.tx_commit();
    return;
  }
}

// ---------------------------------------------------------------------------
// Dimensions

void NcFile::def_dim(const std::string& name, std::uint64_t length) {
  if (length != kUnlimited && length == 0)
    fail(Errc::BadLayout, "fixed dimension lengths are at least 1");
  group_tx([&] {
    auto ds = hier_.dataset_create(hier_.root(), std::string(kDimPrefix) + name,
                                   {}, 8, hier::DatasetLayout::contiguous());
    hier_.dataset_write(ds, hier::Hyperslab{}, wire::u64le(length));
  });
}

hier::Dataset NcFile::open_dim(const std::string& name) const {
  try {
    return hier_.dataset_open(hier_.root(), std::string(kDimPrefix) + name);
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound)
      fail(Errc::UnknownDimension, "no dimension named '" + name + "'");
    throw;
  }
}

DimInfo NcFile::inq_dim(const std::string& name) const {
  auto ds = open_dim(name);
  auto r = hier_.dataset_read(ds, hier::Hyperslab{});
  if (!r.all_present())
    fail(Errc::BadImage, "dimension '" + name + "' holds no length");
  const std::uint64_t raw = wire::get_u64(r.bytes.data());
  if (raw == kUnlimited) return DimInfo{name, 0, true};
  return DimInfo{name, raw, false};
}

// ---------------------------------------------------------------------------
// Variables

void NcFile::def_var(const std::string& name, std::uint64_t element_size,
                     const std::vector<std::string>& dim_names) {
  std::vector<DimInfo> dims;
  for (std::size_t i = 0; i < dim_names.size(); ++i) {
    DimInfo info = inq_dim(dim_names[i]);
    if (info.unlimited && i != 0)
      fail(Errc::UnlimitedNotSlowest,
           "unlimited dimension '" + info.name +
               "' must be the slowest-changing dimension");
    dims.push_back(std::move(info));
  }
  const bool unlimited = !dims.empty() && dims[0].unlimited;

  std::vector<std::uint64_t> shape;
  for (const DimInfo& d : dims) shape.push_back(d.unlimited ? 0 : d.length);

  hier::DatasetLayout layout = hier::DatasetLayout::contiguous();
  if (unlimited) {
    // one row of the slowest dimension per chunk: growth never remaps data
    // and rows stripe across targets
    std::vector<std::uint64_t> chunk(shape.size(), 1);
    for (std::size_t i = 1; i < shape.size(); ++i) chunk[i] = shape[i];
    layout = hier::DatasetLayout::chunked(std::move(chunk));
  }

  group_tx([&] {
    auto ds = hier_.dataset_create(hier_.root(), std::string(kVarPrefix) + name,
                                   shape, element_size, layout);
    if (!dims.empty()) {
      std::string list;
      for (const DimInfo& d : dims) {
        if (!list.empty()) list += '\n';
        list += "/";
        list += kDimPrefix;
        list += d.name;
      }
      hier_.attr_write(ds.oid, kDimListAttr, to_bytes(list));
    }
    if (unlimited) hier_.attr_write(ds.oid, kCurLenAttr, wire::u64le(0));
  });
}

NcFile::VarInfo NcFile::open_var(const std::string& name) const {
  VarInfo v;
  v.ds = hier_.dataset_open(hier_.root(), std::string(kVarPrefix) + name);
  Bytes list;
  try {
    list = hier_.attr_read(v.ds.oid, kDimListAttr);
  } catch (const Error& e) {
    if (e.code() != Errc::NotFound) throw;
    return v;  // scalar variable
  }
  const std::string text = to_string(list);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string path = text.substr(pos, nl - pos);
    const std::string prefix = std::string("/") + kDimPrefix;
    if (!starts_with(path, prefix.c_str()))
      fail(Errc::BadImage, "malformed dimension reference '" + path + "'");
    DimInfo info = inq_dim(path.substr(prefix.size()));
    if (info.unlimited) info.length = cur_length(v.ds.oid);
    v.dims.push_back(std::move(info));
    pos = nl + 1;
  }
  return v;
}

std::uint64_t NcFile::cur_length(ObjectId var_oid) const {
  Bytes cur = hier_.attr_read(var_oid, kCurLenAttr);
  if (cur.size() != 8) fail(Errc::BadImage, "corrupt current-length attribute");
  return wire::get_u64(cur.data());
}

std::vector<DimInfo> NcFile::inq_var_dims(const std::string& var) const {
  return open_var(var).dims;
}

// ---------------------------------------------------------------------------
// Data

void NcFile::put_vara(const std::string& var,
                      const std::vector<std::uint64_t>& start,
                      const std::vector<std::uint64_t>& count,
                      const Bytes& payload) {
  // collectivity is judged by the caller's transaction, not the internal one
  const bool collective = hier_.in_explicit_tx();
  VarInfo v = open_var(var);
  if (start.size() != v.dims.size() || count.size() != v.dims.size())
    fail(Errc::OutOfBounds, "start/count rank disagrees with the variable");
  group_tx([&] {
    if (!v.dims.empty() && v.dims[0].unlimited) {
      const std::uint64_t needed = checked_add(start[0], count[0]);
      if (needed > v.dims[0].length) {
        if (!collective)
          fail(Errc::CollectiveRequired,
               "growing an unlimited dimension requires an explicit "
               "transaction");
        hier_.dataset_extend(v.ds, needed);
        hier_.attr_write(v.ds.oid, kCurLenAttr, wire::u64le(needed));
      }
    }
    hier_.dataset_write(v.ds, hier::Hyperslab{start, count}, payload);
  });
}

Bytes NcFile::get_vara(const std::string& var,
                       const std::vector<std::uint64_t>& start,
                       const std::vector<std::uint64_t>& count) const {
  VarInfo v = open_var(var);
  if (start.size() != v.dims.size() || count.size() != v.dims.size())
    fail(Errc::OutOfBounds, "start/count rank disagrees with the variable");
  if (!v.dims.empty() && v.dims[0].unlimited &&
      checked_add(start[0], count[0]) > v.dims[0].length)
    fail(Errc::OutOfBounds, "read beyond the current length of '" +
                                v.dims[0].name + "'");
  auto r = hier_.dataset_read(v.ds, hier::Hyperslab{start, count});
  return r.bytes;  // never-written cells read back as zero fill
}

// ---------------------------------------------------------------------------
// Attributes

ObjectId NcFile::att_owner(const std::string& var) const {
  if (var.empty()) return hier_.root().oid;
  return hier_.dataset_open(hier_.root(), std::string(kVarPrefix) + var).oid;
}

void NcFile::att_put(const std::string& var, const std::string& name,
                     const Bytes& value) {
  const ObjectId owner = att_owner(var);
  group_tx([&] {
    hier_.attr_write(owner, std::string(kAttPrefix) + name, value);
  });
}

Bytes NcFile::att_get(const std::string& var, const std::string& name) const {
  return hier_.attr_read(att_owner(var), std::string(kAttPrefix) + name);
}

std::vector<std::string> NcFile::att_list(const std::string& var) const {
  std::vector<std::string> out;
  for (const std::string& name : hier_.attr_list(att_owner(var))) {
    if (!starts_with(name, kAttPrefix)) continue;
    const std::string stripped = name.substr(4);
    if (!stripped.empty() && stripped[0] == '_') continue;  // hidden
    out.push_back(stripped);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace daosim::nc
