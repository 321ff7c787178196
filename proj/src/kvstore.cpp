#include "daosim/kvstore.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "daosim/crc32c.hpp"

namespace daosim::kv {

namespace {

void validate_key(const Key& k, const char* what) {
  if (k.empty() || k.size() > kMaxKeyLen)
    fail(Errc::BadKey, std::string(what) + " must be 1..256 bytes");
}

void validate_extent(const Extent& e) {
  if (e.length == 0) fail(Errc::BadExtent, "zero-length extent");
  if (e.offset > ~std::uint64_t{0} - e.length)
    fail(Errc::BadExtent, "extent offset+length overflows");
}

void validate_epoch(Epoch e) {
  if (e == 0) fail(Errc::BadEpoch, "epoch must be positive");
}

std::uint64_t overlap_lo(std::uint64_t a_lo, std::uint64_t b_lo) {
  return std::max(a_lo, b_lo);
}
std::uint64_t overlap_hi(std::uint64_t a_hi, std::uint64_t b_hi) {
  return std::min(a_hi, b_hi);
}

}  // namespace

void TargetStore::update(const ExtentWrite& w) {
  validate_key(w.dkey, "dkey");
  validate_key(w.akey, "akey");
  validate_extent(w.extent);
  validate_epoch(w.epoch);
  if (w.payload.size() != w.extent.length)
    fail(Errc::BadExtent, "payload size disagrees with extent length");
  if (crc32c(w.payload) != w.checksum)
    fail(Errc::ChecksumMismatch, "declared checksum does not match payload");

  auto& entry = objects_[w.oid].dkeys[w.dkey].akeys[w.akey];
  if (conflict_log_) {
    for (const auto& prev : entry.writes) {
      if (prev.epoch == w.epoch &&
          overlap_lo(prev.extent.offset, w.extent.offset) <
              overlap_hi(prev.extent.end(), w.extent.end())) {
        conflict_log_(w);
        break;
      }
    }
  }
  entry.writes.push_back(
      StoredWrite{w.extent, w.payload, w.checksum, w.epoch, next_seq_++});
}

std::int64_t TargetStore::max_tombstone(const ObjectEntry& obj,
                                        const DkeyEntry& dk,
                                        const AkeyEntry& ak, Epoch read_epoch) {
  std::int64_t t = -1;
  auto scan = [&](const std::vector<Epoch>& punches) {
    for (Epoch p : punches)
      if (p <= read_epoch) t = std::max(t, static_cast<std::int64_t>(p));
  };
  scan(obj.punches);
  scan(dk.punches);
  scan(ak.punches);
  return t;
}

FetchResult TargetStore::fetch(const ObjectId& oid, const Key& dkey,
                               const Key& akey, const Extent& extent,
                               Epoch read_epoch) const {
  validate_key(dkey, "dkey");
  validate_key(akey, "akey");
  validate_extent(extent);

  const std::size_t len = static_cast<std::size_t>(extent.length);
  FetchResult out;
  out.bytes.assign(len, 0);
  out.present.assign(len, 0);

  auto oi = objects_.find(oid);
  if (oi == objects_.end()) return out;
  auto di = oi->second.dkeys.find(dkey);
  if (di == oi->second.dkeys.end()) return out;
  auto ai = di->second.akeys.find(akey);
  if (ai == di->second.akeys.end()) return out;
  const AkeyEntry& entry = ai->second;

  const std::uint64_t lo = extent.offset;
  const std::uint64_t hi = extent.end();
  // source epoch per byte: -1 unpainted, 0 base, >0 versioned write
  std::vector<std::int64_t> src(len, -1);

  for (const BaseRun& run : entry.base) {
    const std::uint64_t a = overlap_lo(run.offset, lo);
    const std::uint64_t b = overlap_hi(run.offset + run.payload.size(), hi);
    if (a >= b) continue;
    if (crc32c(run.payload) != run.crc)
      fail(Errc::ChecksumMismatch, "stored base payload failed CRC");
    std::memcpy(out.bytes.data() + (a - lo), run.payload.data() + (a - run.offset),
                static_cast<std::size_t>(b - a));
    std::fill(src.begin() + static_cast<std::ptrdiff_t>(a - lo),
              src.begin() + static_cast<std::ptrdiff_t>(b - lo), std::int64_t{0});
  }

  std::vector<const StoredWrite*> visible;
  for (const StoredWrite& w : entry.writes) {
    if (w.epoch > read_epoch) continue;
    if (overlap_lo(w.extent.offset, lo) >= overlap_hi(w.extent.end(), hi)) continue;
    visible.push_back(&w);
  }
  std::sort(visible.begin(), visible.end(),
            [](const StoredWrite* a, const StoredWrite* b) {
              return a->epoch != b->epoch ? a->epoch < b->epoch : a->seq < b->seq;
            });
  for (const StoredWrite* w : visible) {
    if (crc32c(w->payload) != w->crc)
      fail(Errc::ChecksumMismatch, "stored payload failed CRC");
    const std::uint64_t a = overlap_lo(w->extent.offset, lo);
    const std::uint64_t b = overlap_hi(w->extent.end(), hi);
    std::memcpy(out.bytes.data() + (a - lo),
                w->payload.data() + (a - w->extent.offset),
                static_cast<std::size_t>(b - a));
    std::fill(src.begin() + static_cast<std::ptrdiff_t>(a - lo),
              src.begin() + static_cast<std::ptrdiff_t>(b - lo),
              static_cast<std::int64_t>(w->epoch));
  }

  const std::int64_t tmax =
      max_tombstone(oi->second, di->second, entry, read_epoch);
  for (std::size_t i = 0; i < len; ++i) {
    if (src[i] > tmax) {
      out.present[i] = 1;
    } else {
      out.bytes[i] = 0;
    }
  }

  std::uint32_t crc = 0;
  for (std::size_t i = 0; i < len; ++i)
    if (out.present[i]) crc = crc32c(&out.bytes[i], 1, crc);
  out.crc = crc;
  return out;
}

void TargetStore::punch(const ObjectId& oid, PunchScope scope, const Key& dkey,
                        const Key& akey, Epoch epoch) {
  validate_epoch(epoch);
  switch (scope) {
    case PunchScope::Object:
      objects_[oid].punches.push_back(epoch);
      break;
    case PunchScope::Dkey:
      validate_key(dkey, "dkey");
      objects_[oid].dkeys[dkey].punches.push_back(epoch);
      break;
    case PunchScope::Akey:
      validate_key(dkey, "dkey");
      validate_key(akey, "akey");
      objects_[oid].dkeys[dkey].akeys[akey].punches.push_back(epoch);
      break;
  }
}

bool TargetStore::key_alive(const ObjectEntry& obj, const DkeyEntry& dk,
                            const AkeyEntry& ak, Epoch read_epoch) const {
  const std::int64_t tmax = max_tombstone(obj, dk, ak, read_epoch);
  if (!ak.base.empty() && tmax < 0) return true;
  for (const StoredWrite& w : ak.writes)
    if (w.epoch <= read_epoch && static_cast<std::int64_t>(w.epoch) > tmax)
      return true;
  return false;
}

std::vector<KeyListing> TargetStore::list(const ObjectId& oid,
                                          Epoch read_epoch) const {
  std::vector<KeyListing> out;
  auto oi = objects_.find(oid);
  if (oi == objects_.end()) return out;
  for (const auto& [dkey, dk] : oi->second.dkeys) {
    KeyListing listing{dkey, {}};
    for (const auto& [akey, ak] : dk.akeys)
      if (key_alive(oi->second, dk, ak, read_epoch))
        listing.akeys.push_back(akey);
    if (!listing.akeys.empty()) out.push_back(std::move(listing));
  }
  return out;
}

TargetStore::Merged TargetStore::merge_key(const ObjectEntry& obj,
                                           const DkeyEntry& dk,
                                           const AkeyEntry& ak,
                                           std::uint64_t limit,
                                           Epoch read_epoch) const {
  Merged m;
  const std::size_t len = static_cast<std::size_t>(limit);
  m.bytes.assign(len, 0);
  m.present.assign(len, 0);
  std::vector<std::int64_t> src(len, -1);

  for (const BaseRun& run : ak.base) {
    if (crc32c(run.payload) != run.crc)
      fail(Errc::ChecksumMismatch, "stored base payload failed CRC");
    std::memcpy(m.bytes.data() + run.offset, run.payload.data(), run.payload.size());
    std::fill(src.begin() + static_cast<std::ptrdiff_t>(run.offset),
              src.begin() + static_cast<std::ptrdiff_t>(run.offset + run.payload.size()),
              std::int64_t{0});
  }
  std::vector<const StoredWrite*> visible;
  for (const StoredWrite& w : ak.writes)
    if (w.epoch <= read_epoch) visible.push_back(&w);
  std::sort(visible.begin(), visible.end(),
            [](const StoredWrite* a, const StoredWrite* b) {
              return a->epoch != b->epoch ? a->epoch < b->epoch : a->seq < b->seq;
            });
  for (const StoredWrite* w : visible) {
    if (crc32c(w->payload) != w->crc)
      fail(Errc::ChecksumMismatch, "stored payload failed CRC");
    std::memcpy(m.bytes.data() + w->extent.offset, w->payload.data(),
                w->payload.size());
    std::fill(src.begin() + static_cast<std::ptrdiff_t>(w->extent.offset),
              src.begin() + static_cast<std::ptrdiff_t>(w->extent.end()),
              static_cast<std::int64_t>(w->epoch));
  }

  const std::int64_t tmax = max_tombstone(obj, dk, ak, read_epoch);
  for (std::size_t i = 0; i < len; ++i) {
    if (src[i] > tmax) {
      m.present[i] = 1;
    } else {
      m.bytes[i] = 0;
    }
  }
  return m;
}

std::uint64_t TargetStore::aggregate(const std::optional<ObjectId>& oid_filter,
                                     Epoch upto) {
  validate_epoch(upto);
  std::uint64_t reclaimed = 0;

  for (auto oi = objects_.begin(); oi != objects_.end();) {
    ObjectEntry& obj = oi->second;
    if (oid_filter && oi->first != *oid_filter) {
      ++oi;
      continue;
    }
    for (auto di = obj.dkeys.begin(); di != obj.dkeys.end();) {
      DkeyEntry& dk = di->second;
      for (auto ai = dk.akeys.begin(); ai != dk.akeys.end();) {
        AkeyEntry& ak = ai->second;

        std::uint64_t before = 0;
        std::uint64_t limit = 0;
        for (const BaseRun& run : ak.base) {
          before += run.payload.size();
          limit = std::max(limit, run.offset + run.payload.size());
        }
        bool any_history = !ak.base.empty();
        for (const StoredWrite& w : ak.writes) {
          if (w.epoch > upto) continue;
          any_history = true;
          before += w.extent.length;
          limit = std::max(limit, w.extent.end());
        }

        if (any_history) {
          Merged merged = merge_key(obj, dk, ak, limit, upto);
          ak.base.clear();
          std::erase_if(ak.writes,
                        [&](const StoredWrite& w) { return w.epoch <= upto; });

          std::uint64_t after = 0;
          std::size_t i = 0;
          const std::size_t len = merged.present.size();
          while (i < len) {
            if (!merged.present[i]) {
              ++i;
              continue;
            }
            std::size_t j = i;
            while (j < len && merged.present[j]) ++j;
            Bytes run(merged.bytes.begin() + static_cast<std::ptrdiff_t>(i),
                      merged.bytes.begin() + static_cast<std::ptrdiff_t>(j));
            after += run.size();
            std::uint32_t crc = crc32c(run);
            ak.writes.push_back(StoredWrite{Extent{i, j - i}, std::move(run),
                                            crc, upto, next_seq_++});
            i = j;
          }
          reclaimed += before - after;
        }
        std::erase_if(ak.punches, [&](Epoch p) { return p <= upto; });

        if (ak.base.empty() && ak.writes.empty() && ak.punches.empty())
          ai = dk.akeys.erase(ai);
        else
          ++ai;
      }
      std::erase_if(dk.punches, [&](Epoch p) { return p <= upto; });
      if (dk.akeys.empty() && dk.punches.empty())
        di = obj.dkeys.erase(di);
      else
        ++di;
    }
    std::erase_if(obj.punches, [&](Epoch p) { return p <= upto; });
    if (obj.dkeys.empty() && obj.punches.empty())
      oi = objects_.erase(oi);
    else
      ++oi;
  }
  return reclaimed;
}

void TargetStore::erase_epoch(Epoch epoch) {
  for (auto oi = objects_.begin(); oi != objects_.end();) {
    ObjectEntry& obj = oi->second;
    for (auto di = obj.dkeys.begin(); di != obj.dkeys.end();) {
      DkeyEntry& dk = di->second;
      for (auto ai = dk.akeys.begin(); ai != dk.akeys.end();) {
        AkeyEntry& ak = ai->second;
        std::erase_if(ak.writes,
                      [&](const StoredWrite& w) { return w.epoch == epoch; });
        std::erase_if(ak.punches, [&](Epoch p) { return p == epoch; });
        if (ak.base.empty() && ak.writes.empty() && ak.punches.empty())
          ai = dk.akeys.erase(ai);
        else
          ++ai;
      }
      std::erase_if(dk.punches, [&](Epoch p) { return p == epoch; });
      if (dk.akeys.empty() && dk.punches.empty())
        di = obj.dkeys.erase(di);
      else
        ++di;
    }
    std::erase_if(obj.punches, [&](Epoch p) { return p == epoch; });
    if (obj.dkeys.empty() && obj.punches.empty())
      oi = objects_.erase(oi);
    else
      ++oi;
  }
}

std::vector<Record> TargetStore::scan(Epoch upto) const {
  std::vector<Record> out;
  for (const auto& [oid, obj] : objects_) {
    for (const auto& [dkey, dk] : obj.dkeys) {
      for (const auto& [akey, ak] : dk.akeys) {
        for (const BaseRun& run : ak.base) {
          out.push_back(Record{oid, dkey, akey,
                               Extent{run.offset, run.payload.size()},
                               run.payload, run.crc, 0, Record::Write});
        }
        std::vector<const StoredWrite*> ws;
        for (const StoredWrite& w : ak.writes)
          if (w.epoch <= upto) ws.push_back(&w);
        std::sort(ws.begin(), ws.end(),
                  [](const StoredWrite* a, const StoredWrite* b) {
                    return a->epoch != b->epoch ? a->epoch < b->epoch
                                                : a->seq < b->seq;
                  });
        for (const StoredWrite* w : ws)
          out.push_back(Record{oid, dkey, akey, w->extent, w->payload, w->crc,
                               w->epoch, Record::Write});
        std::vector<Epoch> ps;
        for (Epoch p : ak.punches)
          if (p <= upto) ps.push_back(p);
        std::sort(ps.begin(), ps.end());
        for (Epoch p : ps)
          out.push_back(Record{oid, dkey, akey, Extent{}, {}, 0, p, Record::Punch});
      }
      std::vector<Epoch> ps;
      for (Epoch p : dk.punches)
        if (p <= upto) ps.push_back(p);
      std::sort(ps.begin(), ps.end());
      for (Epoch p : ps)
        out.push_back(Record{oid, dkey, {}, Extent{}, {}, 0, p, Record::Punch});
    }
    std::vector<Epoch> ps;
    for (Epoch p : obj.punches)
      if (p <= upto) ps.push_back(p);
    std::sort(ps.begin(), ps.end());
    for (Epoch p : ps)
      out.push_back(Record{oid, {}, {}, Extent{}, {}, 0, p, Record::Punch});
  }
  return out;
}

std::vector<Record> TargetStore::flatten(Epoch upto) const {
  std::vector<Record> out;
  for (const auto& [oid, obj] : objects_) {
    for (const auto& [dkey, dk] : obj.dkeys) {
      for (const auto& [akey, ak] : dk.akeys) {
        std::uint64_t limit = 0;
        for (const BaseRun& run : ak.base)
          limit = std::max(limit, run.offset + run.payload.size());
        for (const StoredWrite& w : ak.writes)
          if (w.epoch <= upto) limit = std::max(limit, w.extent.end());
        if (limit == 0) continue;
        Merged merged = merge_key(obj, dk, ak, limit, upto);
        std::size_t i = 0;
        while (i < merged.present.size()) {
          if (!merged.present[i]) {
            ++i;
            continue;
          }
          std::size_t j = i;
          while (j < merged.present.size() && merged.present[j]) ++j;
          Bytes run(merged.bytes.begin() + static_cast<std::ptrdiff_t>(i),
                    merged.bytes.begin() + static_cast<std::ptrdiff_t>(j));
          std::uint32_t crc = crc32c(run);
          out.push_back(Record{oid, dkey, akey, Extent{i, j - i}, std::move(run),
                               crc, 0, Record::Write});
          i = j;
        }
      }
    }
  }
  return out;
}

void TargetStore::ingest(const Record& r) {
  if (r.kind == Record::Punch) {
    validate_epoch(r.epoch);
    if (r.dkey.empty()) {
      objects_[r.oid].punches.push_back(r.epoch);
    } else if (r.akey.empty()) {
      validate_key(r.dkey, "dkey");
      objects_[r.oid].dkeys[r.dkey].punches.push_back(r.epoch);
    } else {
      validate_key(r.dkey, "dkey");
      validate_key(r.akey, "akey");
      objects_[r.oid].dkeys[r.dkey].akeys[r.akey].punches.push_back(r.epoch);
    }
    return;
  }
  validate_key(r.dkey, "dkey");
  validate_key(r.akey, "akey");
  validate_extent(r.extent);
  if (r.payload.size() != r.extent.length)
    fail(Errc::BadImage, "record payload size disagrees with extent");
  if (crc32c(r.payload) != r.crc)
    fail(Errc::ChecksumMismatch, "record payload failed CRC");
  auto& entry = objects_[r.oid].dkeys[r.dkey].akeys[r.akey];
  if (r.epoch == 0) {
    entry.base.push_back(BaseRun{r.extent.offset, r.payload, r.crc});
    std::sort(entry.base.begin(), entry.base.end(),
              [](const BaseRun& a, const BaseRun& b) { return a.offset < b.offset; });
  } else {
    entry.writes.push_back(
        StoredWrite{r.extent, r.payload, r.crc, r.epoch, next_seq_++});
  }
}

std::uint64_t TargetStore::stored_payload_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [oid, obj] : objects_)
    for (const auto& [dkey, dk] : obj.dkeys)
      for (const auto& [akey, ak] : dk.akeys) {
        for (const BaseRun& run : ak.base) total += run.payload.size();
        for (const StoredWrite& w : ak.writes) total += w.payload.size();
      }
  return total;
}

bool TargetStore::corrupt_stored_bit(const ObjectId& oid, const Key& dkey,
                                     const Key& akey, std::size_t write_index,
                                     std::size_t byte_index, unsigned bit) {
  auto oi = objects_.find(oid);
  if (oi == objects_.end()) return false;
  auto di = oi->second.dkeys.find(dkey);
  if (di == oi->second.dkeys.end()) return false;
  auto ai = di->second.akeys.find(akey);
  if (ai == di->second.akeys.end()) return false;
  auto& writes = ai->second.writes;
  if (write_index >= writes.size()) return false;
  Bytes& payload = writes[write_index].payload;
  if (payload.empty()) return false;
  payload[byte_index % payload.size()] ^=
      static_cast<std::uint8_t>(1u << (bit % 8));
  return true;
}

bool TargetStore::corrupt_newest_overlapping(const ObjectId& oid,
                                             const Key& dkey, const Key& akey,
                                             const Extent& extent) {
  auto oi = objects_.find(oid);
  if (oi == objects_.end()) return false;
  auto di = oi->second.dkeys.find(dkey);
  if (di == oi->second.dkeys.end()) return false;
  auto ai = di->second.akeys.find(akey);
  if (ai == di->second.akeys.end()) return false;
  StoredWrite* best = nullptr;
  for (StoredWrite& w : ai->second.writes) {
    if (overlap_lo(w.extent.offset, extent.offset) >=
        overlap_hi(w.extent.end(), extent.end()))
      continue;
    if (!best || w.epoch > best->epoch ||
        (w.epoch == best->epoch && w.seq > best->seq))
      best = &w;
  }
  if (!best || best->payload.empty()) return false;
  best->payload[0] ^= 1u;
  return true;
}

}  // namespace daosim::kv
