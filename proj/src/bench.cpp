#include "daosim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string_view>
#include <thread>

#include "daosim/arraync.hpp"
#include "daosim/errors.hpp"
#include "daosim/hier.hpp"
#include "daosim/wire.hpp"

namespace daosim::bench {
namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

/// Deterministic payload generator: same (seed, label, size) always yields
/// the same bytes, so writers and verifiers can regenerate independently.
Bytes gen_bytes(std::uint64_t seed, std::string_view label, std::size_t size) {
  Bytes out(size);
  std::uint64_t state = mix64(seed ^ fnv1a64(label));
  for (std::size_t i = 0; i < size; i += 8) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t v = mix64(state);
    for (std::size_t k = 0; k < 8 && i + k < size; ++k)
      out[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return out;
}

[[noreturn]] void verify_fail(const std::string& what) {
  fail(Errc::VerifyFailed, "read-back mismatch: " + what);
}

void check_equal(const FetchResult& got, const Bytes& want,
                 const std::string& what) {
  if (!got.all_present()) verify_fail(what + " has holes");
  if (got.bytes != want) verify_fail(what);
}

/// Near-even contiguous partition of [0, total) into n blocks.
std::pair<std::uint64_t, std::uint64_t> block_range(std::uint64_t total,
                                                    std::uint32_t n,
                                                    std::uint32_t index) {
  const std::uint64_t lo = total * index / n;
  const std::uint64_t hi = total * (index + 1) / n;
  return {lo, hi};
}

void run_joined(std::uint32_t n_threads,
                const std::function<void(std::uint32_t)>& body) {
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(n_threads);
  threads.reserve(n_threads);
  for (std::uint32_t w = 0; w < n_threads; ++w) {
    threads.emplace_back([&, w] {
      try {
        body(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void drop_if_exists(cont::Pool& pool, const std::string& name) {
  if (pool.has_container(name)) pool.container_delete(name);
}

void fill_metrics(cont::Pool& pool, RunReport& rep) {
  rep.per_target = pool.fabric().queue_stats();
  rep.virtual_elapsed = pool.fabric().virtual_elapsed();
  std::uint64_t total = 0;
  std::uint64_t top = 0;
  for (const auto& t : rep.per_target) {
    total += t.data_busy;
    top = std::max(top, t.data_busy);
  }
  rep.max_target_share = total ? double(top) / double(total) : 0.0;
}

RunReport report_stub(const WorkloadSpec& spec) {
  RunReport rep;
  rep.kind = spec.kind;
  rep.seed = spec.seed;
  rep.workers = spec.workers;
  rep.targets = spec.targets;
  rep.layout = spec.layout.str();
  return rep;
}

hier::DatasetLayout big_layout(const WorkloadSpec& spec) {
  if (spec.layout.chunked)
    return hier::DatasetLayout::chunked({spec.layout.chunk_elems});
  return hier::DatasetLayout::contiguous();
}

}  // namespace

std::string LayoutSpec::str() const {
  if (!chunked) return "contiguous";
  return "chunked:" + std::to_string(chunk_elems);
}

LayoutSpec LayoutSpec::parse(const std::string& s) {
  if (s == "contiguous") return {};
  constexpr std::string_view kPrefix = "chunked:";
  if (s.size() > kPrefix.size() &&
      std::string_view(s).substr(0, kPrefix.size()) == kPrefix) {
    const std::string num = s.substr(kPrefix.size());
    if (!num.empty() &&
        num.find_first_not_of("0123456789") == std::string::npos) {
      LayoutSpec out;
      out.chunked = true;
      out.chunk_elems = std::stoull(num);
      if (out.chunk_elems >= 1) return out;
    }
  }
  fail(Errc::BadConfig,
       "layout must be 'contiguous' or 'chunked:<elements>': " + s);
}

void WorkloadSpec::validate() const {
  if (kind != "clamr" && kind != "legion" && kind != "pio")
    fail(Errc::BadConfig, "unknown workload kind: " + kind);
  if (workers < 1) fail(Errc::BadConfig, "workers must be >= 1");
  if (targets < 1) fail(Errc::BadConfig, "targets must be >= 1");
  if (timesteps < 1) fail(Errc::BadConfig, "timesteps must be >= 1");
  if (layout.chunked && layout.chunk_elems < 1)
    fail(Errc::BadConfig, "chunk size must be >= 1 element");
  if (kind == "clamr" && problem_size < 1)
    fail(Errc::BadConfig, "problem size must be >= 1");
  if (kind == "legion") {
    if (subregions < 1) fail(Errc::BadConfig, "subregions must be >= 1");
    if (elements < subregions)
      fail(Errc::BadConfig, "need at least one element per subregion");
  }
  if (kind == "pio") {
    if (method != "box" && method != "subset")
      fail(Errc::BadConfig, "method must be 'box' or 'subset': " + method);
    if (ntasks < 1) fail(Errc::BadConfig, "ntasks must be >= 1");
    if (niotasks < 1 || niotasks > ntasks)
      fail(Errc::BadConfig, "niotasks must be in [1, ntasks]");
    if (dims.empty() || dims.size() > 3)
      fail(Errc::BadConfig, "pio needs between 1 and 3 dimensions");
    for (auto d : dims)
      if (d < 1) fail(Errc::BadConfig, "pio dimensions must be >= 1");
    if (dims[0] < ntasks)
      fail(Errc::BadConfig, "slowest dimension must hold >= ntasks blocks");
  }
}

std::string RunReport::csv_header() {
  return "kind,seed,workers,targets,layout,bytes_written,bytes_read,"
         "virtual_elapsed,max_target_share,version";
}

std::string RunReport::csv_row() const {
  char share[32];
  std::snprintf(share, sizeof share, "%.4f", max_target_share);
  std::string row;
  row += kind;
  row += ',' + std::to_string(seed);
  row += ',' + std::to_string(workers);
  row += ',' + std::to_string(targets);
  row += ',' + layout;
  row += ',' + std::to_string(bytes_written);
  row += ',' + std::to_string(bytes_read);
  row += ',' + std::to_string(virtual_elapsed);
  row += ',';
  row += share;
  row += ',' + std::to_string(version);
  return row;
}

// ---------------------------------------------------------------------------
// clamr: one container per timestep holding the checkpoint tree; a structure
// transaction lays out groups and datasets, then one data transaction per
// timestep carries every worker's hyperslab writes and is persisted.

namespace {

struct ClamrArray {
  const char* group;
  const char* name;
  std::uint64_t elems;  // 0 = the cell-count arrays sized by the problem
  std::uint64_t esize;
};

constexpr ClamrArray kClamrArrays[] = {
    {"bootstrap", "double_vals", 16, 8}, {"bootstrap", "int_vals", 16, 4},
    {"mesh", "double_vals", 16, 8},      {"mesh", "cpu_timers", 8, 8},
    {"mesh", "gpu_timers", 8, 8},        {"mesh", "int_dist_vals", 16, 4},
    {"mesh", "int_vals", 16, 4},         {"default", "storage", 0, 8},
    {"default", "i", 0, 4},              {"default", "j", 0, 4},
    {"default", "level", 0, 4},          {"default", "H", 0, 8},
    {"default", "U", 0, 8},              {"default", "V", 0, 8},
    {"state", "cpu_timers", 8, 8},       {"state", "gpu_timers", 8, 8},
    {"state", "int_vals", 16, 4},
};

constexpr const char* kClamrGroups[] = {"bootstrap", "mesh", "default",
                                        "state"};

std::string clamr_container(std::uint32_t t) {
  return "clamr_t" + std::to_string(t);
}

std::string clamr_label(std::uint32_t t, const ClamrArray& a) {
  return "clamr/" + std::to_string(t) + "/" + a.group + "/" + a.name;
}

}  // namespace

RunReport run_clamr(cont::Pool& pool, const WorkloadSpec& spec) {
  spec.validate();
  RunReport rep = report_stub(spec);
  const std::uint64_t ncells = spec.problem_size * spec.problem_size;
  std::atomic<std::uint64_t> written{0};
  std::atomic<std::uint64_t> read{0};

  for (std::uint32_t t = 0; t < spec.timesteps; ++t) {
    const std::string name = clamr_container(t);
    drop_if_exists(pool, name);
    hier::File coord = hier::File::create(pool, name);

    // tx 2: the checkpoint tree (coordinator only)
    coord.tx_begin(2);
    std::map<std::string, hier::Group> groups;
    for (const char* g : kClamrGroups)
      groups.emplace(g, coord.group_create(coord.root(), g));
    for (const auto& a : kClamrArrays) {
      const std::uint64_t n = a.elems ? a.elems : ncells;
      const auto layout =
          a.elems ? hier::DatasetLayout::contiguous() : big_layout(spec);
      coord.dataset_create(groups.at(a.group), a.name, {n}, a.esize, layout);
    }
    coord.tx_commit();

    // tx 3: the timestep's data, written by every worker
    coord.tx_begin(3);
    for (const auto& a : kClamrArrays) {
      if (!a.elems) continue;  // cell arrays belong to the workers
      auto ds = coord.dataset_open(groups.at(a.group), a.name);
      Bytes payload = gen_bytes(spec.seed, clamr_label(t, a), a.elems * a.esize);
      coord.dataset_write(ds, {{0}, {a.elems}}, payload);
      written += payload.size();
    }
    const std::uint32_t n_workers =
        static_cast<std::uint32_t>(std::min<std::uint64_t>(spec.workers, ncells));
    run_joined(n_workers, [&](std::uint32_t w) {
      hier::File f = hier::File::open(pool, name, cont::Mode::ReadWrite);
      f.tx_join(3);
      auto grp = f.group_open(f.root(), "default");
      const auto [lo, hi] = block_range(ncells, n_workers, w);
      for (const auto& a : kClamrArrays) {
        if (a.elems) continue;
        auto ds = f.dataset_open(grp, a.name);
        Bytes full = gen_bytes(spec.seed, clamr_label(t, a), ncells * a.esize);
        Bytes slice(full.begin() + static_cast<std::ptrdiff_t>(lo * a.esize),
                    full.begin() + static_cast<std::ptrdiff_t>(hi * a.esize));
        f.dataset_write(ds, {{lo}, {hi - lo}}, slice);
        written += slice.size();
      }
      f.tx_detach();
    });
    coord.tx_commit();
    coord.persist();

    // read back and compare everything this timestep wrote
    for (const auto& a : kClamrArrays) {
      const std::uint64_t n = a.elems ? a.elems : ncells;
      auto ds = coord.dataset_open(groups.at(a.group), a.name);
      auto got = coord.dataset_read(ds, {{0}, {n}});
      check_equal(got, gen_bytes(spec.seed, clamr_label(t, a), n * a.esize),
                  name + ":/" + a.group + "/" + a.name);
      read += got.bytes.size();
    }
    rep.version = coord.version();
  }

  rep.bytes_written = written;
  rep.bytes_read = read;
  fill_metrics(pool, rep);
  return rep;
}

// ---------------------------------------------------------------------------
// legion: one shared 1-D dataset; each subregion runs its own transaction, so
// write phases of different subregions interleave across the epoch sequence,
// then a read phase verifies every byte.

RunReport run_legion(cont::Pool& pool, const WorkloadSpec& spec) {
  spec.validate();
  RunReport rep = report_stub(spec);
  const std::string name = "legion";
  drop_if_exists(pool, name);

  hier::File coord = hier::File::create(pool, name);
  coord.tx_begin(2);
  coord.dataset_create(coord.root(), "elements", {spec.elements}, 8,
                       big_layout(spec));
  coord.tx_commit();

  const Bytes full = gen_bytes(spec.seed, "legion/elements", spec.elements * 8);
  const std::uint32_t n_workers = std::min(spec.workers, spec.subregions);
  std::atomic<std::uint64_t> written{0};
  std::atomic<std::uint64_t> read{0};

  run_joined(n_workers, [&](std::uint32_t w) {
    hier::File f = hier::File::open(pool, name, cont::Mode::ReadWrite);
    auto ds = f.dataset_open(f.root(), "elements");
    for (std::uint32_t s = w; s < spec.subregions; s += n_workers) {
      const auto [lo, hi] = block_range(spec.elements, spec.subregions, s);
      Bytes slice(full.begin() + static_cast<std::ptrdiff_t>(lo * 8),
                  full.begin() + static_cast<std::ptrdiff_t>(hi * 8));
      f.tx_begin(3 + s);
      f.dataset_write(ds, {{lo}, {hi - lo}}, slice);
      f.tx_commit();
      written += slice.size();
    }
  });

  run_joined(n_workers, [&](std::uint32_t w) {
    hier::File f = hier::File::open(pool, name, cont::Mode::ReadOnly);
    auto ds = f.dataset_open(f.root(), "elements");
    for (std::uint32_t s = w; s < spec.subregions; s += n_workers) {
      const auto [lo, hi] = block_range(spec.elements, spec.subregions, s);
      auto got = f.dataset_read(ds, {{lo}, {hi - lo}});
      Bytes want(full.begin() + static_cast<std::ptrdiff_t>(lo * 8),
                 full.begin() + static_cast<std::ptrdiff_t>(hi * 8));
      check_equal(got, want, "legion subregion " + std::to_string(s));
      read += got.bytes.size();
    }
  });

  coord.persist();
  rep.version = coord.version();
  rep.bytes_written = written;
  rep.bytes_read = read;
  fill_metrics(pool, rep);
  return rep;
}

// ---------------------------------------------------------------------------
// pio: compute tasks own near-even blocks of the slowest dimension; data is
// rearranged onto I/O workers which append one time-dimension row per step
// to three variables inside a shared collective transaction.

namespace {

struct PioPlan {
  std::uint64_t row_elems = 1;    // product of the fixed dimensions
  std::uint64_t inner_elems = 1;  // product of dims[1:]
  // one entry per message: {io task, x-range lo, x-range hi}
  struct Message {
    std::uint32_t io;
    std::uint64_t lo, hi;
  };
  std::vector<Message> messages;
};

PioPlan pio_plan(const WorkloadSpec& spec) {
  PioPlan plan;
  for (auto d : spec.dims) plan.row_elems *= d;
  for (std::size_t i = 1; i < spec.dims.size(); ++i)
    plan.inner_elems *= spec.dims[i];
  const std::uint64_t x = spec.dims[0];
  if (spec.method == "subset") {
    // each compute task forwards its whole block to exactly one I/O task
    for (std::uint32_t t = 0; t < spec.ntasks; ++t) {
      const auto [lo, hi] = block_range(x, spec.ntasks, t);
      const std::uint32_t io =
          static_cast<std::uint32_t>(std::uint64_t(t) * spec.niotasks /
                                     spec.ntasks);
      if (lo < hi) plan.messages.push_back({io, lo, hi});
    }
  } else {
    // box: compute blocks are cut along the I/O tasks' even ranges
    for (std::uint32_t t = 0; t < spec.ntasks; ++t) {
      const auto [blo, bhi] = block_range(x, spec.ntasks, t);
      for (std::uint32_t io = 0; io < spec.niotasks; ++io) {
        const auto [rlo, rhi] = block_range(x, spec.niotasks, io);
        const std::uint64_t lo = std::max(blo, rlo);
        const std::uint64_t hi = std::min(bhi, rhi);
        if (lo < hi) plan.messages.push_back({io, lo, hi});
      }
    }
  }
  return plan;
}

struct PioVar {
  const char* name;
  std::uint64_t esize;
};

constexpr PioVar kPioVars[] = {{"vi", 4}, {"vr4", 4}, {"vr8", 8}};

std::string pio_label(const char* var, std::uint32_t t) {
  return std::string("pio/") + var + "/" + std::to_string(t);
}

}  // namespace

RunReport run_pio(cont::Pool& pool, const WorkloadSpec& spec) {
  spec.validate();
  RunReport rep = report_stub(spec);
  const std::string name = "pio";
  drop_if_exists(pool, name);
  const PioPlan plan = pio_plan(spec);
  rep.messages = plan.messages.size();

  nc::NcFile coord = nc::NcFile::create(pool, name);
  coord.def_dim("time", nc::kUnlimited);
  static constexpr const char* kDimNames[] = {"x", "y", "z"};
  std::vector<std::string> dim_names = {"time"};
  for (std::size_t i = 0; i < spec.dims.size(); ++i) {
    coord.def_dim(kDimNames[i], spec.dims[i]);
    dim_names.push_back(kDimNames[i]);
  }
  for (const auto& v : kPioVars) coord.def_var(v.name, v.esize, dim_names);
  coord.att_put("", "source", to_bytes("daosim pio benchmark"));

  const Epoch first_tx = coord.version() + 1;
  const std::uint32_t n_workers = std::min(spec.workers, spec.niotasks);
  std::atomic<std::uint64_t> written{0};
  std::atomic<std::uint64_t> read{0};

  for (std::uint32_t t = 0; t < spec.timesteps; ++t) {
    const Epoch n = first_tx + t;
    coord.tx_begin(n);
    run_joined(n_workers, [&](std::uint32_t w) {
      nc::NcFile f = nc::NcFile::open(pool, name, cont::Mode::ReadWrite);
      f.tx_join(n);
      for (const auto& v : kPioVars) {
        const Bytes row =
            gen_bytes(spec.seed, pio_label(v.name, t), plan.row_elems * v.esize);
        for (const auto& m : plan.messages) {
          if (m.io % n_workers != w) continue;  // this worker's I/O tasks
          std::vector<std::uint64_t> start = {t, m.lo};
          std::vector<std::uint64_t> count = {1, m.hi - m.lo};
          for (std::size_t i = 1; i < spec.dims.size(); ++i) {
            start.push_back(0);
            count.push_back(spec.dims[i]);
          }
          const auto lo = m.lo * plan.inner_elems * v.esize;
          const auto hi = m.hi * plan.inner_elems * v.esize;
          Bytes slice(row.begin() + static_cast<std::ptrdiff_t>(lo),
                      row.begin() + static_cast<std::ptrdiff_t>(hi));
          f.put_vara(v.name, start, count, slice);
          written += slice.size();
        }
      }
      f.tx_detach();
    });
    coord.tx_commit();
  }

  // read back every row of every variable and compare
  for (const auto& v : kPioVars) {
    for (std::uint32_t t = 0; t < spec.timesteps; ++t) {
      std::vector<std::uint64_t> start = {t};
      std::vector<std::uint64_t> count = {1};
      for (auto d : spec.dims) {
        start.push_back(0);
        count.push_back(d);
      }
      Bytes got = coord.get_vara(v.name, start, count);
      if (got != gen_bytes(spec.seed, pio_label(v.name, t),
                           plan.row_elems * v.esize))
        verify_fail(std::string("pio ") + v.name + " row " + std::to_string(t));
      read += got.size();
    }
  }

  coord.persist();
  rep.version = coord.version();
  rep.bytes_written = written;
  rep.bytes_read = read;
  fill_metrics(pool, rep);
  return rep;
}

RunReport run(cont::Pool& pool, const WorkloadSpec& spec) {
  spec.validate();
  if (spec.kind == "clamr") return run_clamr(pool, spec);
  if (spec.kind == "legion") return run_legion(pool, spec);
  return run_pio(pool, spec);
}

}  // namespace daosim::bench
