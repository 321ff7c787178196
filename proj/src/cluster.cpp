#include "daosim/cluster.hpp"

#include <algorithm>
#include <set>

#include "daosim/crc32c.hpp"
#include "daosim/hash.hpp"

namespace daosim::cluster {

const ObjectClass& object_class(std::uint8_t class_code) {
  static const ObjectClass kClasses[] = {
      {0, 1, false},  // whole object on one target
      {1, 1, true},   // dkey-striped
      {2, 2, true},   // dkey-striped, two replicas
  };
  if (class_code >= std::size(kClasses))
    fail(Errc::UnknownClass,
         "object class " + std::to_string(class_code) + " is not assigned");
  return kClasses[class_code];
}

ObjectLayout::ObjectLayout(ObjectId oid, std::uint32_t n_targets)
    : oid_(oid), class_(object_class(oid.class_code())), n_targets_(n_targets) {
  if (n_targets_ == 0) fail(Errc::BadConfig, "pool must have at least 1 target");
  std::uint8_t raw[16];
  for (int i = 0; i < 8; ++i) raw[i] = static_cast<std::uint8_t>(oid_.hi >> (8 * i));
  for (int i = 0; i < 8; ++i)
    raw[8 + i] = static_cast<std::uint8_t>(oid_.lo >> (8 * i));
  object_target_ = static_cast<TargetId>(fnv1a64(raw, 16) % n_targets_);
}

std::vector<TargetId> ObjectLayout::replicas(const Key& dkey) const {
  const std::uint64_t base = class_.dkey_striped
                                 ? fnv1a64(dkey.data(), dkey.size())
                                 : object_target_;
  std::vector<TargetId> out;
  for (std::uint32_t r = 0; r < class_.replication; ++r) {
    const TargetId tid = static_cast<TargetId>((base + r) % n_targets_);
    if (std::find(out.begin(), out.end(), tid) == out.end()) out.push_back(tid);
  }
  return out;
}

std::uint64_t Cluster::TicketLock::lock() {
  const std::uint64_t d = depth_.fetch_add(1, std::memory_order_relaxed) + 1;
  std::unique_lock<std::mutex> lk(mu_);
  const std::uint64_t me = next_ticket_++;
  cv_.wait(lk, [&] { return serving_ == me; });
  return d;
}

void Cluster::TicketLock::unlock() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    ++serving_;
  }
  depth_.fetch_sub(1, std::memory_order_relaxed);
  cv_.notify_all();
}

Cluster::Cluster(std::uint32_t n_targets, std::uint64_t request_cost)
    : n_targets_(n_targets), request_cost_(request_cost) {
  if (n_targets_ == 0) fail(Errc::BadConfig, "pool must have at least 1 target");
  targets_.reserve(n_targets_);
  for (std::uint32_t i = 0; i < n_targets_; ++i)
    targets_.push_back(std::make_unique<Target>());
}

template <typename Op>
bool Cluster::serve(Target& t, bool is_data, Op&& op) const {
  struct Guard {
    TicketLock& q;
    ~Guard() { q.unlock(); }
  };
  const std::uint64_t at_entry = t.queue.lock();
  Guard guard{t.queue};
  t.stats.max_depth = std::max(t.stats.max_depth, at_entry);
  if (t.dropped) return false;
  t.stats.requests += 1;
  t.stats.busy += request_cost_;
  if (is_data) {
    t.stats.data_requests += 1;
    t.stats.data_busy += request_cost_;
  }
  op(t);
  return true;
}

template <typename Op>
void Cluster::with_target(Target& t, Op&& op) const {
  struct Guard {
    TicketLock& q;
    ~Guard() { q.unlock(); }
  };
  t.queue.lock();
  Guard guard{t.queue};
  op(t);
}

kv::TargetStore& Cluster::store_for(Target& t, const Uuid& container) {
  return t.stores[container];
}

void Cluster::route_update(const Uuid& container, const ObjectLayout& layout,
                           const ExtentWrite& write) {
  const bool is_data = write.dkey != "META";
  bool any = false;
  for (TargetId tid : layout.replicas(write.dkey)) {
    Target& t = *targets_[tid];
    const bool served = serve(t, is_data, [&](Target& tgt) {
      store_for(tgt, container).update(write);
      if (is_data) tgt.stats.bytes_in += write.payload.size();
      if (tgt.corrupt_next) {
        store_for(tgt, container)
            .corrupt_newest_overlapping(write.oid, write.dkey, write.akey,
                                        write.extent);
        tgt.corrupt_next = false;
      }
    });
    any = any || served;
  }
  if (!any)
    fail(Errc::AllReplicasFailed, "no replica target accepted the update");
}

FetchResult Cluster::route_fetch(const Uuid& container,
                                 const ObjectLayout& layout, const ObjectId& oid,
                                 const Key& dkey, const Key& akey,
                                 const Extent& extent, Epoch read_epoch) {
  const bool is_data = dkey != "META";
  const auto reps = layout.replicas(dkey);
  bool saw_corruption = false;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    Target& t = *targets_[reps[r]];
    FetchResult res;
    bool got = false;
    try {
      const bool served = serve(t, is_data, [&](Target& tgt) {
        auto it = tgt.stores.find(container);
        if (it == tgt.stores.end()) {
          res = FetchResult{};
          res.bytes.assign(static_cast<std::size_t>(extent.length), 0);
          res.present.assign(static_cast<std::size_t>(extent.length), 0);
        } else {
          res = it->second.fetch(oid, dkey, akey, extent, read_epoch);
        }
        if (is_data)
          for (std::size_t i = 0; i < res.present.size(); ++i)
            if (res.present[i]) tgt.stats.bytes_out += 1;
      });
      got = served;
    } catch (const Error& e) {
      if (e.code() != Errc::ChecksumMismatch) throw;
      saw_corruption = true;
      got = false;
    }
    if (got) {
      // independent end-to-end re-verification of the merged result
      std::uint32_t crc = 0;
      for (std::size_t i = 0; i < res.present.size(); ++i)
        if (res.present[i]) crc = crc32c(&res.bytes[i], 1, crc);
      if (crc == res.crc) return res;
      saw_corruption = true;
    }
    const bool last = r + 1 == reps.size();
    with_target(t, [&](Target& tgt) { tgt.stats.fetch_fallbacks += 1; });
    if (last) break;
  }
  if (saw_corruption)
    fail(Errc::ChecksumMismatch, "no replica returned an intact payload");
  fail(Errc::AllReplicasFailed, "every replica failed or was dropped");
}

void Cluster::route_punch(const Uuid& container, const ObjectLayout& layout,
                          PunchScope scope, const Key& dkey, const Key& akey,
                          Epoch epoch) {
  std::vector<TargetId> tids;
  if (scope == PunchScope::Object &&
      object_class(layout.oid().class_code()).dkey_striped) {
    tids.resize(n_targets_);
    for (std::uint32_t i = 0; i < n_targets_; ++i) tids[i] = i;
  } else {
    tids = layout.replicas(scope == PunchScope::Object ? Key("\x01") : dkey);
  }
  const bool is_data = scope == PunchScope::Object || dkey != "META";
  bool any = false;
  for (TargetId tid : tids) {
    Target& t = *targets_[tid];
    const bool served = serve(t, is_data, [&](Target& tgt) {
      store_for(tgt, container).punch(layout.oid(), scope, dkey, akey, epoch);
    });
    any = any || served;
  }
  if (!any)
    fail(Errc::AllReplicasFailed, "no replica target accepted the punch");
}

std::vector<kv::KeyListing> Cluster::route_list(const Uuid& container,
                                                const ObjectLayout& layout,
                                                Epoch read_epoch) const {
  std::vector<TargetId> tids;
  if (object_class(layout.oid().class_code()).dkey_striped) {
    tids.resize(n_targets_);
    for (std::uint32_t i = 0; i < n_targets_; ++i) tids[i] = i;
  } else {
    tids = layout.replicas(Key("\x01"));
  }
  std::map<Key, std::set<Key>> merged;
  for (TargetId tid : tids) {
    Target& t = *targets_[tid];
    serve(t, false, [&](Target& tgt) {
      auto it = tgt.stores.find(container);
      if (it == tgt.stores.end()) return;
      for (auto& listing : it->second.list(layout.oid(), read_epoch))
        for (auto& akey : listing.akeys) merged[listing.dkey].insert(akey);
    });
  }
  std::vector<kv::KeyListing> out;
  for (auto& [dkey, akeys] : merged)
    out.push_back(kv::KeyListing{dkey, {akeys.begin(), akeys.end()}});
  return out;
}

void Cluster::inject_fault(TargetId target, FaultKind kind) {
  if (target >= n_targets_) fail(Errc::BadConfig, "no such target");
  with_target(*targets_[target], [&](Target& t) {
    if (kind == FaultKind::DropTarget)
      t.dropped = true;
    else
      t.corrupt_next = true;
  });
}

void Cluster::clear_faults(TargetId target) {
  if (target >= n_targets_) fail(Errc::BadConfig, "no such target");
  with_target(*targets_[target], [&](Target& t) {
    t.dropped = false;
    t.corrupt_next = false;
  });
}

std::vector<TargetStats> Cluster::queue_stats() const {
  std::vector<TargetStats> out;
  out.reserve(n_targets_);
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) { out.push_back(t.stats); });
  return out;
}

std::uint64_t Cluster::virtual_elapsed() const {
  std::uint64_t best = 0;
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) { best = std::max(best, t.stats.busy); });
  return best;
}

std::uint64_t Cluster::aggregate(const Uuid& container,
                                 const std::optional<ObjectId>& oid_filter,
                                 Epoch upto) {
  std::uint64_t reclaimed = 0;
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) {
      auto it = t.stores.find(container);
      if (it != t.stores.end()) reclaimed += it->second.aggregate(oid_filter, upto);
    });
  return reclaimed;
}

void Cluster::erase_epoch(const Uuid& container, Epoch epoch) {
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) {
      auto it = t.stores.find(container);
      if (it != t.stores.end()) it->second.erase_epoch(epoch);
    });
}

std::vector<kv::Record> Cluster::scan_container(const Uuid& container,
                                                Epoch upto) const {
  std::vector<kv::Record> out;
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) {
      auto it = t.stores.find(container);
      if (it == t.stores.end()) return;
      auto records = it->second.scan(upto);
      out.insert(out.end(), std::make_move_iterator(records.begin()),
                 std::make_move_iterator(records.end()));
    });
  return out;
}

std::vector<kv::Record> Cluster::flatten_container(const Uuid& container,
                                                   Epoch upto) const {
  std::vector<kv::Record> out;
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) {
      auto it = t.stores.find(container);
      if (it == t.stores.end()) return;
      auto records = it->second.flatten(upto);
      out.insert(out.end(), std::make_move_iterator(records.begin()),
                 std::make_move_iterator(records.end()));
    });
  return out;
}

void Cluster::restore_container(const Uuid& container,
                                const std::vector<kv::Record>& records) {
  for (const kv::Record& r : records) {
    const ObjectLayout layout = open_object(r.oid);
    std::vector<TargetId> tids;
    if (r.kind == kv::Record::Punch && r.dkey.empty() &&
        object_class(r.oid.class_code()).dkey_striped) {
      tids.resize(n_targets_);
      for (std::uint32_t i = 0; i < n_targets_; ++i) tids[i] = i;
    } else {
      tids = layout.replicas(r.dkey.empty() ? Key("\x01") : r.dkey);
    }
    for (TargetId tid : tids)
      with_target(*targets_[tid], [&](Target& t) {
        auto& store = t.stores[container];
        if (r.kind == kv::Record::Punch) {
          const PunchScope scope = r.dkey.empty()  ? PunchScope::Object
                                   : r.akey.empty() ? PunchScope::Dkey
                                                    : PunchScope::Akey;
          store.punch(r.oid, scope, r.dkey, r.akey, r.epoch);
        } else {
          store.ingest(r);
        }
      });
  }
}

void Cluster::drop_container(const Uuid& container) {
  for (auto& tp : targets_)
    with_target(*tp, [&](Target& t) { t.stores.erase(container); });
}

bool Cluster::corrupt_stored_bit(const Uuid& container,
                                 const ObjectLayout& layout, const ObjectId& oid,
                                 const Key& dkey, const Key& akey,
                                 std::uint32_t replica, std::size_t write_index,
                                 std::size_t byte_index, unsigned bit) {
  const auto reps = layout.replicas(dkey);
  if (reps.empty()) return false;
  Target& t = *targets_[reps[replica % reps.size()]];
  bool ok = false;
  with_target(t, [&](Target& tgt) {
    auto it = tgt.stores.find(container);
    if (it != tgt.stores.end())
      ok = it->second.corrupt_stored_bit(oid, dkey, akey, write_index,
                                         byte_index, bit);
  });
  return ok;
}

}  // namespace daosim::cluster
