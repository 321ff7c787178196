// Acceptance gate: one check per user-facing guarantee, one line of output
// each. The binary exits non-zero if any criterion fails.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "daosim/arraync.hpp"
#include "daosim/bench.hpp"
#include "daosim/cluster.hpp"
#include "daosim/container.hpp"
#include "daosim/errors.hpp"
#include "daosim/hier.hpp"
#include "daosim/kvstore.hpp"
#include "daosim/types.hpp"
#include "daosim/wire.hpp"
#include "oracle.hpp"
#include "workload.hpp"

using namespace daosim;
using cont::ContainerHandle;
using cont::Mode;
using cont::Pool;

namespace {

struct Outcome {
  bool pass = false;
  std::string note;  // metric on pass, diagnosis on failure
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f s", s);
  return buf;
}

/// Pool backed by a scratch directory, removed on destruction.
struct ScratchPool {
  std::filesystem::path dir;
  std::shared_ptr<Pool> pool;

  explicit ScratchPool(std::uint32_t targets) {
    static std::mt19937_64 rng(std::random_device{}());
    dir = std::filesystem::temp_directory_path() /
          ("daosim-acceptance-" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    pool = Pool::create(targets, dir.string());
  }
  ~ScratchPool() {
    pool.reset();
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
  Pool& operator*() { return *pool; }
  Pool* operator->() { return pool.get(); }
};

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

// ---------------------------------------------------------------------------
// 1. Versioned-store oracle equivalence over 1,000 seeded workloads.

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    kv::TargetStore store;
    oracle::Replay replay;
    workload::random_workload(seed, store, replay);
    const std::string diag = workload::compare_all(store, replay);
    if (!diag.empty())
      return {false, "seed " + std::to_string(seed) + ": " + diag};
  }
  const double dt = seconds_since(t0);
  if (dt >= 10.0)
    return {false, "exceeded the 10 s budget: " + fmt_seconds(dt)};
  return {true, "1000 workloads match the replay oracle in " + fmt_seconds(dt)};
}

// ---------------------------------------------------------------------------
// 2. Strict-sequence commit vs a reference state machine, exhaustively over
//    every completion order of 6 transactions with seeded abort/skip mixes.

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  const ObjectId oid = make_object_id(0, 0, 2);
  auto pool = Pool::create(1);
  std::array<Epoch, 6> perm = {1, 2, 3, 4, 5, 6};
  std::uint64_t perm_index = 0;
  std::uint64_t checked_steps = 0;

  do {
    std::mt19937_64 rng(perm_index);
    std::array<int, 7> outcome{};  // 1..6 -> 0 finish, 1 abort, 2 skip
    for (int n = 1; n <= 6; ++n) outcome[n] = int(rng() % 3);

    const std::string name = "perm" + std::to_string(perm_index);
    pool->container_create(name);
    auto h = pool->container_open(name, Mode::ReadWrite);
    std::map<Epoch, cont::TxContext> open_txs;
    for (Epoch n = 1; n <= 6; ++n) {
      if (outcome[n] == 2) continue;
      auto tx = h.tx_start(n);
      tx.update(oid, "d", "a", {0, 8}, wire::u64le(n));
      open_txs.emplace(n, std::move(tx));
    }

    std::array<bool, 8> complete{};
    for (const Epoch n : perm) {
      switch (outcome[n]) {
        case 0: open_txs.at(n).finish(); break;
        case 1: open_txs.at(n).abort(); break;
        default: h.tx_skip(n); break;
      }
      complete[n] = true;
      Epoch want = 0;
      while (want < 6 && complete[want + 1]) ++want;
      const Epoch got = h.version();
      if (got != want)
        return {false, "permutation " + std::to_string(perm_index) +
                           ": after completing " + std::to_string(n) +
                           " expected version " + std::to_string(want) +
                           ", got " + std::to_string(got)};
      ++checked_steps;
    }
    h.close();
    pool->container_delete(name);
    ++perm_index;
  } while (std::next_permutation(perm.begin(), perm.end()));

  const double dt = seconds_since(t0);
  if (dt >= 5.0) return {false, "exceeded the 5 s budget: " + fmt_seconds(dt)};
  return {true, std::to_string(perm_index) + " orders, " +
                    std::to_string(checked_steps) + " steps checked in " +
                    fmt_seconds(dt)};
}

// ---------------------------------------------------------------------------
// 3. Atomic visibility under 4 writers and 4 readers, 100 transactions,
//    20 seeded runs: a read version never exposes part of a transaction.

Outcome criterion3() {
  constexpr Epoch kTxs = 100;
  constexpr int kWriters = 4;
  constexpr int kReaders = 4;
  constexpr std::uint64_t kCells = 4;
  const ObjectId oid = make_object_id(0, 0, 3);
  std::atomic<std::uint64_t> violations{0};

  for (std::uint64_t run = 1; run <= 20; ++run) {
    auto pool = Pool::create(4);
    pool->container_create("c");
    std::atomic<bool> done{false};

    auto check_at = [&](ContainerHandle& h, Epoch at) {
      for (std::uint64_t k = 0; k < kCells; ++k) {
        const auto r = h.read_at(at, oid, "c" + std::to_string(k), "v", {0, 8});
        if (!r.all_present() || wire::get_u64(r.bytes.data()) != at)
          violations.fetch_add(1);
      }
    };

    std::vector<std::thread> actors;
    for (int w = 0; w < kWriters; ++w) {
      actors.emplace_back([&, w] {
        auto h = pool->container_open("c", Mode::ReadWrite);
        for (Epoch n = Epoch(w) + 1; n <= kTxs; n += kWriters) {
          auto tx = h.tx_start(n);
          for (std::uint64_t k = 0; k < kCells; ++k)
            tx.update(oid, "c" + std::to_string(k), "v", {0, 8},
                      wire::u64le(n));
          tx.finish();
        }
      });
    }
    for (int r = 0; r < kReaders; ++r) {
      actors.emplace_back([&, r] {
        auto h = pool->container_open("c", Mode::ReadOnly);
        std::mt19937_64 rng(run * 8 + std::uint64_t(r));
        while (!done.load(std::memory_order_relaxed)) {
          const Epoch v = h.version();
          if (v == 0) continue;
          check_at(h, 1 + rng() % v);
        }
      });
    }
    for (int w = 0; w < kWriters; ++w) actors[std::size_t(w)].join();
    done.store(true);
    for (std::size_t r = kWriters; r < actors.size(); ++r) actors[r].join();

    // deterministic sweep: every committed version, once
    auto h = pool->container_open("c", Mode::ReadOnly);
    for (Epoch at = 1; at <= kTxs; ++at) check_at(h, at);
  }

  if (violations.load() != 0)
    return {false, std::to_string(violations.load()) + " partial reads"};
  return {true, "20 runs x 100 transactions, zero partial reads"};
}

// ---------------------------------------------------------------------------
// 4. Persist roundtrip + snapshot independence, bit-exact through reload.

Outcome criterion4() {
  const ObjectId o1 = make_object_id(0, 0, 41);
  const ObjectId o2 = make_object_id(1, 0, 42);
  const Extent window{0, 32};

  struct Captured {
    std::string what;
    Bytes bytes;
    std::vector<std::uint8_t> present;
  };
  std::vector<Captured> want_main, want_snap;
  auto capture = [&](std::vector<Captured>& out, ContainerHandle& h, Epoch at,
                     ObjectId oid, const Key& dkey, const Key& akey) {
    const auto r = h.read_at(at, oid, dkey, akey, window);
    out.push_back({"v" + std::to_string(at) + "/" + dkey + "/" + akey, r.bytes,
                   r.present});
  };
  auto recheck = [&](const std::vector<Captured>& want, ContainerHandle& h,
                     const std::function<void(std::vector<Captured>&)>& redo)
      -> std::string {
    std::vector<Captured> got;
    redo(got);
    for (std::size_t i = 0; i < want.size(); ++i)
      if (want[i].bytes != got[i].bytes || want[i].present != got[i].present)
        return "mismatch at " + want[i].what;
    (void)h;
    return {};
  };

  ScratchPool scratch(3);

  auto capture_main = [&](std::vector<Captured>& out, ContainerHandle& h) {
    for (Epoch at = 1; at <= h.version(); ++at) {
      capture(out, h, at, o1, "d", "a");
      capture(out, h, at, o1, "d", "b");
      capture(out, h, at, o2, "x", "y");
    }
  };
  auto capture_snap = [&](std::vector<Captured>& out, ContainerHandle& h) {
    for (Epoch at = 0; at <= h.version(); ++at) {
      capture(out, h, at, o1, "d", "a");
      capture(out, h, at, o2, "x", "y");
    }
  };

  {
    auto pool = scratch.pool;
    pool->container_create("main");
    auto h = pool->container_open("main", Mode::ReadWrite);
    auto t1 = h.tx_start(1);
    t1.update(o1, "d", "a", {0, 16}, bytes_of("0123456789abcdef"));
    t1.update(o2, "x", "y", {8, 8}, bytes_of("ABCDEFGH"));
    t1.finish();
    auto t2 = h.tx_start(2);
    t2.update(o1, "d", "a", {4, 8}, bytes_of("--mid---"));
    t2.punch(o2, PunchScope::Akey, "x", "y");
    t2.finish();
    auto t3 = h.tx_start(3);
    t3.update(o1, "d", "b", {0, 4}, bytes_of("zzzz"));
    t3.update(o2, "x", "y", {0, 4}, bytes_of("back"));
    t3.finish();

    h.persist(3);
    h.snapshot(3, "snap");
    auto s = pool->container_open("snap", Mode::ReadWrite);

    // diverge both sides
    auto t4 = h.tx_start(4);
    t4.update(o1, "d", "a", {0, 4}, bytes_of("MAIN"));
    t4.finish();
    auto st1 = s.tx_start(1);
    st1.update(o1, "d", "a", {2, 6}, bytes_of("SNAPPY"));
    st1.finish();

    capture_main(want_main, h);  // versions 1..4, after snap diverged
    capture_snap(want_snap, s);  // versions 0..1, after main diverged

    // the snapshot base equals what main exposed at its cut
    const auto main3 = h.read_at(3, o1, "d", "a", window);
    const auto snap0 = s.read_at(0, o1, "d", "a", window);
    if (main3.bytes != snap0.bytes || main3.present != snap0.present)
      return {false, "snapshot base diverged from the persisted cut"};

    h.persist(4);
    s.persist(1);
    h.close();
    s.close();
  }

  scratch.pool.reset();  // drop the live pool; reload purely from disk
  auto pool = Pool::load(scratch.dir.string());
  scratch.pool = pool;

  auto h = pool->container_open("main", Mode::ReadOnly);
  auto s = pool->container_open("snap", Mode::ReadOnly);
  if (h.version() != 4) return {false, "main reloaded at the wrong version"};
  if (s.version() != 1) return {false, "snap reloaded at the wrong version"};

  auto diag = recheck(want_main, h,
                      [&](std::vector<Captured>& out) { capture_main(out, h); });
  if (diag.empty())
    diag = recheck(want_snap, s,
                   [&](std::vector<Captured>& out) { capture_snap(out, s); });
  if (!diag.empty()) return {false, "after reload: " + diag};
  return {true, "main v1..4 and snapshot v0..1 bit-exact through reload"};
}

// ---------------------------------------------------------------------------
// 5. Aggregation transparency on criterion-1 workloads.

Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t positive = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    kv::TargetStore store;
    oracle::Replay replay;
    workload::random_workload(seed, store, replay);
    const Epoch horizon = 1 + std::mt19937_64(seed ^ 0xa99e)() % workload::kMaxEpoch;

    // strict overlap: one byte written at two distinct epochs <= horizon
    bool overlap = false;
    {
      using Span = std::tuple<Epoch, std::uint64_t, std::uint64_t>;
      std::map<std::tuple<ObjectId, Key, Key>, std::vector<Span>> writes;
      for (const auto& op : replay.ops()) {
        if (op.kind != oracle::Op::Write || op.epoch > horizon) continue;
        auto& spans = writes[{op.oid, op.dkey, op.akey}];
        const std::uint64_t lo = op.offset, hi = op.offset + op.payload.size();
        for (const auto& [e, l, h] : spans)
          if (e != op.epoch && lo < h && l < hi) overlap = true;
        spans.emplace_back(op.epoch, lo, hi);
      }
    }

    const std::uint64_t reclaimed = store.aggregate(std::nullopt, horizon);
    if (overlap && reclaimed == 0)
      return {false, "seed " + std::to_string(seed) +
                         ": overlap below horizon " + std::to_string(horizon) +
                         " reclaimed nothing"};
    if (reclaimed > 0) ++positive;

    const auto space = workload::small_space();
    for (const auto& oid : space.oids)
      for (const auto& dkey : space.dkeys)
        for (const auto& akey : space.akeys)
          for (Epoch e = horizon; e <= workload::kMaxEpoch; ++e) {
            const auto got = store.fetch(oid, dkey, akey,
                                         {0, workload::kWindow}, e);
            const auto want =
                replay.fetch(oid, dkey, akey, 0, workload::kWindow, e);
            for (std::uint64_t b = 0; b < workload::kWindow; ++b)
              if (bool(got.present[b]) != want.present[b] ||
                  (want.present[b] && got.bytes[b] != want.bytes[b]))
                return {false, "seed " + std::to_string(seed) + ": read at " +
                                   std::to_string(e) +
                                   " changed after aggregate(" +
                                   std::to_string(horizon) + ")"};
          }
  }
  return {true, "1000 horizons, " + std::to_string(positive) +
                    " reclaimed > 0, reads above unchanged (" +
                    fmt_seconds(seconds_since(t0)) + ")"};
}

// ---------------------------------------------------------------------------
// 6. Checksum end-to-end: 256 at-rest single-bit corruptions; replication 1
//    must surface ChecksumMismatch, replication 2 must mask; zero silent.

Outcome criterion6() {
  auto pool = Pool::create(8);
  pool->container_create("c");
  auto h = pool->container_open("c", Mode::ReadWrite);
  auto& fabric = pool->fabric();

  const ObjectId plain = make_object_id(1, 0, 61);   // replication 1
  const ObjectId mirrored = make_object_id(2, 0, 62);  // replication 2

  std::array<Bytes, 8> truth;
  auto tx = h.tx_start(1);
  for (std::uint64_t d = 0; d < 8; ++d) {
    Bytes payload(64);
    std::mt19937_64 rng(0xc6 + d);
    for (auto& b : payload) b = std::uint8_t(rng());
    truth[d] = payload;
    tx.update(plain, std::to_string(d), "a", {0, 64}, payload);
    tx.update(mirrored, std::to_string(d), "a", {0, 64}, payload);
  }
  tx.finish();

  int surfaced = 0, masked = 0, silent = 0, misfired = 0;
  for (int i = 0; i < 128; ++i) {
    const std::uint64_t d = std::uint64_t(i) / 16;
    const Key dkey = std::to_string(d);
    const std::size_t byte = std::size_t(i % 16) * 4;
    const unsigned bit = unsigned(i) % 8;

    if (!fabric.corrupt_stored_bit(h.container_id(), fabric.open_object(plain),
                                   plain, dkey, "a", 0, 0, byte, bit))
      return {false, "injection " + std::to_string(i) + " found no record"};
    try {
      (void)h.read_at(1, plain, dkey, "a", {0, 64});
      ++silent;  // corrupted single-replica data served without complaint
    } catch (const Error& e) {
      if (e.code() == Errc::ChecksumMismatch)
        ++surfaced;
      else
        ++misfired;
    }
    fabric.corrupt_stored_bit(h.container_id(), fabric.open_object(plain),
                              plain, dkey, "a", 0, 0, byte, bit);  // repair
    if (h.read_at(1, plain, dkey, "a", {0, 64}).bytes != truth[d])
      return {false, "repair of injection " + std::to_string(i) + " failed"};
  }

  std::uint64_t fallbacks_before = 0;
  for (const auto& t : fabric.queue_stats())
    fallbacks_before += t.fetch_fallbacks;

  for (int i = 0; i < 128; ++i) {
    const std::uint64_t d = std::uint64_t(i) / 16;
    const Key dkey = std::to_string(d);
    const std::size_t byte = std::size_t(i % 16) * 4;
    const unsigned bit = unsigned(i) % 8;

    if (!fabric.corrupt_stored_bit(h.container_id(),
                                   fabric.open_object(mirrored), mirrored, dkey,
                                   "a", 0, 0, byte, bit))
      return {false, "replica injection " + std::to_string(i) +
                         " found no record"};
    try {
      const auto r = h.read_at(1, mirrored, dkey, "a", {0, 64});
      if (r.bytes == truth[d])
        ++masked;
      else
        ++silent;  // wrong bytes replaced the corrupted replica's answer
    } catch (const Error&) {
      ++misfired;  // an intact replica existed; surfacing is a miss here
    }
    fabric.corrupt_stored_bit(h.container_id(), fabric.open_object(mirrored),
                              mirrored, dkey, "a", 0, 0, byte, bit);  // repair
  }

  std::uint64_t fallbacks = 0;
  for (const auto& t : fabric.queue_stats()) fallbacks += t.fetch_fallbacks;
  fallbacks -= fallbacks_before;

  if (silent != 0 || misfired != 0 || surfaced != 128 || masked != 128)
    return {false, std::to_string(surfaced) + " surfaced, " +
                       std::to_string(masked) + " masked, " +
                       std::to_string(silent) + " silent, " +
                       std::to_string(misfired) + " misfired"};
  if (fallbacks != 128)
    return {false, "expected 128 replica fallbacks, saw " +
                       std::to_string(fallbacks)};
  return {true, "128 surfaced + 128 masked, 0 silent, 128 fallbacks"};
}

// ---------------------------------------------------------------------------
// 7. Bottleneck/chunking property on the legion workload, 8 targets.

Outcome criterion7() {
  // One subregion per point task, one chunk per subregion: 256 independent
  // writers whose pieces either all queue on a single target (contiguous
  // placement) or stripe across all eight (chunked placement).
  bench::WorkloadSpec spec;
  spec.kind = "legion";
  spec.targets = 8;
  spec.subregions = 256;

  ScratchPool p1(8);
  const auto contiguous = bench::run_legion(*p1, spec);

  spec.layout = bench::LayoutSpec::parse("chunked:512");  // 256 chunks
  ScratchPool p2(8);
  const auto chunked = bench::run_legion(*p2, spec);

  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.2f",
                double(contiguous.virtual_elapsed) /
                    double(chunked.virtual_elapsed));
  if (contiguous.max_target_share != 1.0)
    return {false, "contiguous share " +
                       std::to_string(contiguous.max_target_share)};
  if (chunked.max_target_share > 0.25)
    return {false,
            "chunked share " + std::to_string(chunked.max_target_share)};
  if (contiguous.virtual_elapsed < 4 * chunked.virtual_elapsed)
    return {false, "makespan improved only " + std::string(ratio) + "x"};
  return {true, "share 1.0 -> " + std::to_string(chunked.max_target_share)
                    .substr(0, 6) +
                    ", makespan " + std::to_string(contiguous.virtual_elapsed) +
                    " -> " + std::to_string(chunked.virtual_elapsed) + " (" +
                    ratio + "x)"};
}

// ---------------------------------------------------------------------------
// 8. NetCDF schema conformance.

Outcome criterion8() {
  auto pool = Pool::create(4);
  auto f = nc::NcFile::create(*pool, "nc");
  f.def_dim("x", 10);
  f.def_dim("time", nc::kUnlimited);
  f.def_var("x", 4, {"x"});  // name collision with the dimension
  f.def_var("v", 8, {"time", "x"});
  f.att_put("", "title", bytes_of("acceptance"));
  f.att_put("v", "units", bytes_of("kelvin"));
  f.put_vara("x", {0}, {10}, Bytes(40, 7));
  f.tx_begin(f.hier().handle().next_tx());
  f.put_vara("v", {0, 0}, {1, 10}, Bytes(80, 9));
  f.tx_commit();

  // namespace scan: every object name carries exactly one prefix
  const std::array<std::string, 3> prefixes = {"DIM_", "VAR_", "ATT_"};
  auto prefix_count = [&](const std::string& name) {
    int c = 0;
    for (const auto& p : prefixes)
      if (name.rfind(p, 0) == 0) ++c;
    return c;
  };
  std::vector<ObjectId> owners = {f.hier().root().oid};
  for (const std::string& path : f.hier().list_paths()) {
    if (path.find('/', 1) != std::string::npos)
      return {false, "nested object " + path};
    if (prefix_count(path.substr(1)) != 1)
      return {false, "object " + path + " lacks a unique prefix"};
    owners.push_back(f.hier().path_resolve(path));
  }
  for (const ObjectId owner : owners)
    for (const std::string& name : f.hier().attr_list(owner))
      if (name != nc::kDimListAttr && prefix_count(name) != 1)
        return {false, "attribute '" + name + "' lacks a unique prefix"};

  // the unlimited dimension stores the all-ones sentinel at rest
  auto dim = f.hier().dataset_open(f.hier().root(), "DIM_time");
  if (f.hier().dataset_read(dim, hier::Hyperslab{}).bytes != Bytes(8, 0xFF))
    return {false, "unlimited sentinel is not all-ones"};

  // DIMENSION_LIST drives structure but never enumerates
  const auto raw = f.hier().attr_list(f.hier().path_resolve("/VAR_v"));
  if (std::count(raw.begin(), raw.end(), nc::kDimListAttr) != 1)
    return {false, "variable lost its DIMENSION_LIST"};
  const auto visible = f.att_list("v");
  if (visible != std::vector<std::string>{"units"})
    return {false, "attribute enumeration leaked structural names"};
  if (f.inq_var_dims("v") !=
      std::vector<nc::DimInfo>{{"time", 1, true}, {"x", 10, false}})
    return {false, "inq_var_dims misreports the variable"};

  // dimension/variable base-name collision coexists
  if (f.inq_dim("x") != nc::DimInfo{"x", 10, false})
    return {false, "dimension 'x' damaged by the variable 'x'"};
  if (f.get_vara("x", {0}, {10}) != Bytes(40, 7))
    return {false, "variable 'x' damaged by the dimension 'x'"};

  return {true, "prefix scan, sentinel, hidden DIMENSION_LIST, collision"};
}

// ---------------------------------------------------------------------------
// 9. CLAMR checkpoint tree equals the golden path set.

Outcome criterion9() {
  const std::vector<std::string> golden = {
      "/bootstrap",
      "/bootstrap/double_vals",
      "/bootstrap/int_vals",
      "/default",
      "/default/H",
      "/default/U",
      "/default/V",
      "/default/i",
      "/default/j",
      "/default/level",
      "/default/storage",
      "/mesh",
      "/mesh/cpu_timers",
      "/mesh/double_vals",
      "/mesh/gpu_timers",
      "/mesh/int_dist_vals",
      "/mesh/int_vals",
      "/state",
      "/state/cpu_timers",
      "/state/gpu_timers",
      "/state/int_vals",
  };

  ScratchPool scratch(8);
  bench::WorkloadSpec spec;
  spec.kind = "clamr";
  spec.problem_size = 128;
  spec.workers = 1;
  spec.timesteps = 1;
  (void)bench::run_clamr(*scratch, spec);

  auto f = hier::File::open(*scratch, "clamr_t0", Mode::ReadOnly);
  const auto paths = f.list_paths();
  if (paths != golden) {
    std::set<std::string> got(paths.begin(), paths.end());
    std::set<std::string> want(golden.begin(), golden.end());
    for (const auto& p : want)
      if (!got.count(p)) return {false, "missing " + p};
    for (const auto& p : got)
      if (!want.count(p)) return {false, "unexpected " + p};
    return {false, "path order diverged"};
  }
  return {true, "all 21 paths, exact set equality"};
}

// ---------------------------------------------------------------------------
// 10. PIO rearrangement counts, both methods fully verified.

Outcome criterion10() {
  bench::WorkloadSpec spec;
  spec.kind = "pio";
  spec.ntasks = 16;
  spec.niotasks = 4;
  spec.dims = {1000};
  spec.workers = 4;

  spec.method = "subset";
  ScratchPool p1(8);
  const auto subset = bench::run_pio(*p1, spec);
  if (subset.messages != spec.ntasks)
    return {false, "subset sent " + std::to_string(subset.messages) +
                       " messages, wanted exactly " +
                       std::to_string(spec.ntasks)};
  if (subset.bytes_read != subset.bytes_written || subset.bytes_written == 0)
    return {false, "subset verified " + std::to_string(subset.bytes_read) +
                       " of " + std::to_string(subset.bytes_written) +
                       " bytes"};

  spec.method = "box";
  spec.niotasks = 5;  // misaligned: blocks straddle I/O ranges
  ScratchPool p2(8);
  const auto box = bench::run_pio(*p2, spec);
  if (box.messages < spec.ntasks)
    return {false,
            "box sent only " + std::to_string(box.messages) + " messages"};
  if (box.bytes_read != box.bytes_written || box.bytes_written == 0)
    return {false, "box verified " + std::to_string(box.bytes_read) + " of " +
                       std::to_string(box.bytes_written) + " bytes"};

  return {true, "subset exactly " + std::to_string(subset.messages) +
                    ", box " + std::to_string(box.messages) +
                    " >= ntasks, 100% read back"};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* title;
    Outcome (*fn)();
  };
  const Entry entries[] = {
      {1, "versioned-store oracle equivalence", criterion1},
      {2, "strict-sequence commit", criterion2},
      {3, "atomic visibility", criterion3},
      {4, "snapshot independence and persist roundtrip", criterion4},
      {5, "aggregation transparency", criterion5},
      {6, "checksum end-to-end", criterion6},
      {7, "bottleneck/chunking property", criterion7},
      {8, "netcdf schema conformance", criterion8},
      {9, "clamr checkpoint tree fixture", criterion9},
      {10, "pio rearrangement counts", criterion10},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out = {false, std::string("unexpected exception: ") + ex.what()};
    }
    std::printf("%s: criterion %d — %s: %s\n", out.pass ? "PASS" : "FAIL",
                e.id, e.title, out.note.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
