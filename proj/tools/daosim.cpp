#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daosim/bench.hpp"
#include "daosim/container.hpp"
#include "daosim/errors.hpp"
#include "daosim/image.hpp"

namespace fs = std::filesystem;
using daosim::Errc;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kVerifyError = 3;

int error_exit_code(const daosim::Error& e) {
  switch (e.code()) {
    case Errc::VerifyFailed:
    case Errc::ChecksumMismatch:
      return kVerifyError;
    default:
      return kConfigError;
  }
}

/// Pool used by a subcommand: an explicit/ambient directory, or a throwaway
/// one that lives only for this invocation.
struct PoolScope {
  std::shared_ptr<daosim::cont::Pool> pool;
  fs::path scratch;  // non-empty when we created a temp dir to delete

  ~PoolScope() {
    pool.reset();
    if (!scratch.empty()) {
      std::error_code ec;
      fs::remove_all(scratch, ec);
    }
  }
};

std::string ambient_pool_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("DAOSIM_POOL")) return env;
  return {};
}

PoolScope open_pool(const std::string& dir_flag, std::uint32_t targets) {
  PoolScope scope;
  const std::string dir = ambient_pool_dir(dir_flag);
  if (!dir.empty()) {
    if (fs::exists(fs::path(dir) / "manifest.json")) {
      scope.pool = daosim::cont::Pool::load(dir);
      if (scope.pool->n_targets() != targets)
        std::cerr << "note: pool has " << scope.pool->n_targets()
                  << " targets; ignoring --targets " << targets << "\n";
    } else {
      scope.pool = daosim::cont::Pool::create(targets, dir);
    }
    return scope;
  }
  std::random_device rd;
  scope.scratch = fs::temp_directory_path() /
                  ("daosim-bench-" + std::to_string(rd()));
  scope.pool = daosim::cont::Pool::create(targets, scope.scratch.string());
  return scope;
}

std::vector<std::uint64_t> parse_dims(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = std::min(csv.find(',', pos), csv.size());
    const std::string part = csv.substr(pos, comma - pos);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      daosim::fail(Errc::BadConfig, "--dims expects comma-separated numbers");
    out.push_back(std::stoull(part));
    pos = comma + 1;
  }
  return out;
}

int cmd_pool_create(std::uint32_t targets, const std::string& dir,
                    std::uint64_t cost) {
  auto pool = daosim::cont::Pool::create(targets, dir, cost);
  std::cout << pool->id().str() << "\n";
  return kOk;
}

int cmd_bench(const daosim::bench::WorkloadSpec& spec,
              const std::string& pool_dir) {
  PoolScope scope = open_pool(pool_dir, spec.targets);
  daosim::bench::WorkloadSpec actual = spec;
  actual.targets = scope.pool->n_targets();
  const auto rep = daosim::bench::run(*scope.pool, actual);
  std::cout << daosim::bench::RunReport::csv_header() << "\n"
            << rep.csv_row() << "\n";
  std::cerr << "verified " << rep.bytes_read << " bytes";
  if (rep.messages) std::cerr << ", " << rep.messages << " messages";
  std::cerr << "\n";
  return kOk;
}

int cmd_container_dump(const std::string& path, const std::string& name,
                       const std::string& pool_dir) {
  const std::string dir = ambient_pool_dir(pool_dir);
  if (dir.empty())
    daosim::fail(Errc::BadConfig, "container dump needs --pool or DAOSIM_POOL");
  auto pool = daosim::cont::Pool::load(dir);
  auto handle = pool->container_open(name, daosim::cont::Mode::ReadOnly);
  daosim::image::Image img;
  img.container_id = handle.container_id();
  img.committed_version = handle.version();
  img.records = pool->fabric().scan_container(img.container_id,
                                              img.committed_version);
  daosim::image::write(path, img);
  std::cerr << "dumped " << name << " at version " << img.committed_version
            << " (" << img.records.size() << " records)\n";
  return kOk;
}

int cmd_container_load(const std::string& path, const std::string& name,
                       const std::string& pool_dir) {
  const std::string dir = ambient_pool_dir(pool_dir);
  if (dir.empty())
    daosim::fail(Errc::BadConfig, "container load needs --pool or DAOSIM_POOL");
  auto pool = daosim::cont::Pool::load(dir);
  const auto id = pool->container_load_image(path, name);
  std::cout << id.str() << "\n";
  return kOk;
}

int cmd_fsck(const std::string& path) {
  const auto report = daosim::image::fsck(path);
  if (report.ok) {
    std::cout << "ok container " << report.container_id.str() << " version "
              << report.committed_version << " records " << report.records
              << "\n";
    return kOk;
  }
  std::cout << "corrupt container " << report.container_id.str() << "\n";
  for (const auto& p : report.problems) std::cout << "problem: " << p << "\n";
  return kVerifyError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"daosim: transactional object-storage simulator"};
  app.require_subcommand(1);

  // pool create
  auto* pool_cmd = app.add_subcommand("pool", "pool administration");
  pool_cmd->require_subcommand(1);
  auto* pool_create = pool_cmd->add_subcommand("create", "create a new pool");
  std::uint32_t pc_targets = 8;
  std::string pc_dir;
  std::uint64_t pc_cost = 1;
  pool_create->add_option("--targets", pc_targets, "number of storage targets")
      ->required();
  pool_create->add_option("--dir", pc_dir, "pool directory")->required();
  pool_create->add_option("--request-cost", pc_cost,
                          "virtual ticks per request");

  // bench <kind>
  daosim::bench::WorkloadSpec spec;
  std::string bench_pool_dir;
  std::string layout_str = "contiguous";
  std::string dims_str = "1000";
  auto* bench_cmd = app.add_subcommand("bench", "run a benchmark workload");
  bench_cmd->require_subcommand(1);
  std::vector<CLI::App*> kinds;
  auto* clamr = bench_cmd->add_subcommand("clamr", "AMR checkpoint workload");
  auto* legion = bench_cmd->add_subcommand("legion", "subregion phase workload");
  auto* pio = bench_cmd->add_subcommand("pio", "rearranged array workload");
  for (CLI::App* k : {clamr, legion, pio}) {
    k->add_option("--seed", spec.seed, "deterministic seed")
        ->default_val(std::uint64_t{42});
    k->add_option("--workers", spec.workers, "worker threads");
    k->add_option("--targets", spec.targets, "targets for throwaway pools");
    k->add_option("--layout", layout_str,
                  "contiguous | chunked:<elements>");
    k->add_option("--pool", bench_pool_dir, "pool directory (or DAOSIM_POOL)");
    kinds.push_back(k);
  }
  clamr->add_option("--problem-size", spec.problem_size,
                    "cells per mesh side (cells = size^2)");
  clamr->add_option("--timesteps", spec.timesteps, "checkpoints to write");
  legion->add_option("--elements", spec.elements, "elements in the dataset");
  legion->add_option("--subregions", spec.subregions, "independent subregions");
  pio->add_option("--ntasks", spec.ntasks, "compute tasks");
  pio->add_option("--niotasks", spec.niotasks, "I/O tasks");
  pio->add_option("--method", spec.method, "box | subset");
  pio->add_option("--dims", dims_str, "comma-separated array dimensions");
  pio->add_option("--timesteps", spec.timesteps, "time-dimension rows");

  // container dump/load
  auto* cont_cmd = app.add_subcommand("container", "container image transfer");
  cont_cmd->require_subcommand(1);
  std::string img_path, cont_name, cont_pool_dir;
  auto* dump = cont_cmd->add_subcommand("dump", "write a container image");
  dump->add_option("path", img_path, "image file path")->required();
  dump->add_option("--name", cont_name, "container name")->required();
  dump->add_option("--pool", cont_pool_dir, "pool directory (or DAOSIM_POOL)");
  auto* load = cont_cmd->add_subcommand("load", "load a container image");
  load->add_option("path", img_path, "image file path")->required();
  load->add_option("--name", cont_name, "name for the loaded container")
      ->required();
  load->add_option("--pool", cont_pool_dir, "pool directory (or DAOSIM_POOL)");

  // fsck
  auto* fsck = app.add_subcommand("fsck", "validate a container image");
  std::string fsck_path;
  fsck->add_option("path", fsck_path, "image file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (pool_create->parsed()) return cmd_pool_create(pc_targets, pc_dir, pc_cost);
    if (bench_cmd->parsed()) {
      spec.kind = clamr->parsed() ? "clamr" : legion->parsed() ? "legion" : "pio";
      spec.layout = daosim::bench::LayoutSpec::parse(layout_str);
      if (pio->parsed()) spec.dims = parse_dims(dims_str);
      return cmd_bench(spec, bench_pool_dir);
    }
    if (dump->parsed()) return cmd_container_dump(img_path, cont_name, cont_pool_dir);
    if (load->parsed()) return cmd_container_load(img_path, cont_name, cont_pool_dir);
    if (fsck->parsed()) return cmd_fsck(fsck_path);
  } catch (const daosim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return error_exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
