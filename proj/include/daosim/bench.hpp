#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daosim/cluster.hpp"
#include "daosim/container.hpp"

namespace daosim::bench {

/// Data placement for the benchmark datasets.
struct LayoutSpec {
  bool chunked = false;
  std::uint64_t chunk_elems = 0;  ///< elements per chunk (chunked only)

  std::string str() const;
  /// Parses "contiguous" or "chunked:<elements>".
  static LayoutSpec parse(const std::string& s);
};

/// Configuration for one benchmark run.  Fields are shared across kinds;
/// each workload reads the ones it needs.
struct WorkloadSpec {
  std::string kind;  ///< "clamr" | "legion" | "pio"
  std::uint64_t seed = 42;
  std::uint32_t workers = 4;
  std::uint32_t targets = 8;
  LayoutSpec layout;

  // clamr
  std::uint64_t problem_size = 64;  ///< cells = problem_size^2
  std::uint32_t timesteps = 1;      ///< also PIO time-dimension rows

  // legion
  std::uint64_t elements = 131072;
  std::uint32_t subregions = 16;

  // pio
  std::uint32_t ntasks = 16;
  std::uint32_t niotasks = 4;
  std::string method = "subset";  ///< "box" | "subset"
  std::vector<std::uint64_t> dims = {1000};

  void validate() const;  ///< throws BadConfig on inconsistent settings
};

/// Outcome of a run: byte accounting, virtual-time metrics and the final
/// committed version of the (last) container the workload produced.
struct RunReport {
  std::string kind;
  std::uint64_t seed = 0;
  std::uint32_t workers = 0;
  std::uint32_t targets = 0;
  std::string layout;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t virtual_elapsed = 0;
  double max_target_share = 0.0;  ///< busiest target's share of data work
  Epoch version = 0;
  std::uint64_t messages = 0;  ///< PIO rearrangement messages (0 otherwise)
  std::vector<cluster::TargetStats> per_target;

  static std::string csv_header();
  std::string csv_row() const;
};

RunReport run_clamr(cont::Pool& pool, const WorkloadSpec& spec);
RunReport run_legion(cont::Pool& pool, const WorkloadSpec& spec);
RunReport run_pio(cont::Pool& pool, const WorkloadSpec& spec);

/// Dispatches on spec.kind.
RunReport run(cont::Pool& pool, const WorkloadSpec& spec);

}  // namespace daosim::bench
