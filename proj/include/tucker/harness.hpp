#pragma once

// Experiment plumbing: random tensor generation, single runs with metrics,
// benchmark specs and CSV reports.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tucker/coo.hpp"
#include "tucker/decomp.hpp"

namespace tucker {

/// Every cell is kept with probability `density`, with a value drawn uniform
/// from [0, 1). Cells are visited with the last mode fastest, so the file is
/// sorted with mode 1 most significant.
CooFile gen_random_tensor(const Dims& dims, double density, std::uint64_t seed, const std::filesystem::path& out);

enum class Algorithm { hosvd, hooi, sp, mp };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct RunConfig {
  Algorithm algorithm = Algorithm::hooi;
  std::filesystem::path input;
  Dims dims;
  Dims core;
  ConvergenceConfig convergence;
  DecompOptions decomp;
  std::size_t sort_buffer_bytes = default_sort_buffer_bytes;
  Index slab_size = 0;
  /// Slice store cache; defaults to "<input>.stores".
  std::filesystem::path work_dir;
  /// Container written when non-empty.
  std::filesystem::path output;
};

struct RunMetrics {
  std::string algorithm;
  Dims dims;
  Dims core;
  double density = 0.0;
  std::uint64_t nnz = 0;
  double fit = 0.0;
  std::size_t iterations = 0;
  std::string terminated_by;
  double seconds = 0.0;          // decomposition only
  double prepare_seconds = 0.0;  // loading the tensor, or building slice stores
  std::uint64_t peak_bytes = 0;  // tracked high-water mark of the decomposition
  std::uint64_t prepare_peak_bytes = 0;
  std::uint64_t input_bytes = 0;
  std::uint64_t output_bytes = 0;
  std::uint64_t store_bytes = 0;
  bool rank_deficient = false;
  bool empty_slices = false;
};

struct RunOutcome {
  RunMetrics metrics;
  RunResult result;
};

/// For hosvd and hooi the peak covers loading the tensor into memory; for sp
/// and mp it covers the decomposition only, store building is reported in the
/// prepare columns.
RunOutcome run(const RunConfig& config);

std::string metrics_json(const RunMetrics& m);

/// Content key of an input file for the slice store cache.
std::string input_content_key(const std::filesystem::path& path, const Dims& dims);

struct BenchInstance {
  std::string group;  // "instance", "size", "ratio" or "core4"
  std::string name;
  Dims dims;
  Dims core;
  double density = 0.1;
  double parameter = 0.0;  // sweep variable: side, ratio or core side
};

struct BenchSpec {
  std::vector<std::uint64_t> seeds{1};
  std::vector<Algorithm> algorithms{Algorithm::hosvd, Algorithm::hooi, Algorithm::sp, Algorithm::mp};
  double density = 0.1;
  ConvergenceConfig convergence;
  std::size_t sort_buffer_bytes = default_sort_buffer_bytes;
  Index slab_size = 0;
  std::filesystem::path work_dir = "bench-work";
  std::vector<BenchInstance> instances;
};

/// Parses the line-oriented key = value format documented in docs/bench-spec.md.
/// Errors name the line.
BenchSpec parse_bench_spec(std::istream& in, const std::string& source = "<spec>");
BenchSpec load_bench_spec(const std::filesystem::path& path);

struct BenchOptions {
  unsigned jobs = 1;           // concurrent (instance, seed) cells
  bool deterministic = false;  // write zero in every timing column
  bool keep_files = false;     // keep generated tensors and slice stores
};

struct BenchRow {
  BenchInstance instance;
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

inline constexpr int bench_csv_schema = 1;

std::vector<BenchRow> run_bench(const BenchSpec& spec, const BenchOptions& options = {});
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool deterministic = false);
std::vector<std::string> bench_csv_header();

/// Minimal RFC 4180 reader.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

/// Means over seeds per (group, instance, algorithm), with the relative fit
/// over HO-SVD as a percentage when HO-SVD rows are present.
void write_aggregate_csv(std::ostream& out, const std::vector<std::vector<std::string>>& bench_csv);

/// Shortest round-trip decimal form.
std::string format_double(double v);
std::string format_dims(const Dims& d);  // "60x60x60"
Dims parse_dims(std::string_view text);  // accepts "60x60x60", "60,60,60" or "60 60 60"
/// Byte count with an optional K, M or G suffix (powers of 1024).
std::size_t parse_byte_size(std::string_view text);

}  // namespace tucker
