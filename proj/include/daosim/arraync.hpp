#pragma once

#include <string>
#include <vector>

#include "daosim/hier.hpp"

namespace daosim::nc {

/// All-ones length sentinel marking an unlimited dimension.
inline constexpr std::uint64_t kUnlimited = ~std::uint64_t{0};

inline constexpr char kDimPrefix[] = "DIM_";
inline constexpr char kVarPrefix[] = "VAR_";
inline constexpr char kAttPrefix[] = "ATT_";
inline constexpr char kDimListAttr[] = "DIMENSION_LIST";
inline constexpr char kCurLenAttr[] = "ATT__cur0";

struct DimInfo {
  std::string name;
  std::uint64_t length = 0;  // current length for unlimited dimensions
  bool unlimited = false;

  bool operator==(const DimInfo&) const = default;
};

/// Array/dimension layer: dimensions and variables are prefixed datasets in
/// the file's root group; attributes carry the ATT_ prefix; variables link to
/// their dimensions through a DIMENSION_LIST attribute hidden from attribute
/// enumeration.
///
/// Unlimited dimensions grow only while the caller owns an explicit
/// transaction (the stand-in for collective access).
class NcFile {
 public:
  static NcFile create(cont::Pool& pool, const std::string& name);
  static NcFile open(cont::Pool& pool, const std::string& name, cont::Mode mode);

  hier::File& hier() { return hier_; }
  Epoch version() const { return hier_.version(); }
  std::string persist() { return hier_.persist(); }

  void tx_begin(Epoch n) { hier_.tx_begin(n); }
  void tx_join(Epoch n) { hier_.tx_join(n); }
  void tx_commit() { hier_.tx_commit(); }
  void tx_abort() { hier_.tx_abort(); }
  void tx_detach() { hier_.tx_detach(); }

  void def_dim(const std::string& name, std::uint64_t length);
  void def_var(const std::string& name, std::uint64_t element_size,
               const std::vector<std::string>& dim_names);

  void put_vara(const std::string& var, const std::vector<std::uint64_t>& start,
                const std::vector<std::uint64_t>& count, const Bytes& payload);
  Bytes get_vara(const std::string& var, const std::vector<std::uint64_t>& start,
                 const std::vector<std::uint64_t>& count) const;

  std::vector<DimInfo> inq_var_dims(const std::string& var) const;
  DimInfo inq_dim(const std::string& name) const;

  /// var == "" addresses the file-global (root) attribute set.
  void att_put(const std::string& var, const std::string& name,
               const Bytes& value);
  Bytes att_get(const std::string& var, const std::string& name) const;
  /// Visible attribute names: ATT_-prefixed, prefix stripped, names starting
  /// with '_' hidden. DIMENSION_LIST never appears.
  std::vector<std::string> att_list(const std::string& var) const;

 private:
  struct VarInfo {
    hier::Dataset ds;
    std::vector<DimInfo> dims;
  };

  explicit NcFile(hier::File f) : hier_(std::move(f)) {}

  template <typename Fn>
  void group_tx(Fn&& fn);

  hier::Dataset open_dim(const std::string& name) const;
  VarInfo open_var(const std::string& name) const;
  std::uint64_t cur_length(ObjectId var_oid) const;
  ObjectId att_owner(const std::string& var) const;

  hier::File hier_;
};

}  // namespace daosim::nc
