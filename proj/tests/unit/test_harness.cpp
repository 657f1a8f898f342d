#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "tucker/harness.hpp"

using namespace tucker;
using fixture::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunConfig config_for(Algorithm a, const CooFile& f, const Dims& core, const TempDir& dir) {
  RunConfig c;
  c.algorithm = a;
  c.input = f.path;
  c.dims = f.dims;
  c.core = core;
  c.sort_buffer_bytes = min_sort_buffer_bytes;
  c.work_dir = dir / "work";
  return c;
}

}  // namespace

TEST(PeakScope, Examples) {
  {
    memory::PeakScope s;
    EXPECT_EQ(s.peak_bytes(), 0u);
  }
  memory::PeakScope outer;
  std::size_t seen = 0;
  {
    memory::PeakScope s;
    { Tensor t({10, 10, 10}); }
    EXPECT_GE(s.peak_bytes(), 8000u);
    seen = s.peak_bytes();
    { Tensor small({2, 2}); }
    EXPECT_EQ(s.peak_bytes(), seen);  // monotone, a smaller allocation does not lower it
  }
  EXPECT_GE(outer.peak_bytes(), seen);
}

TEST(Generator, DensityOneAndDeterminism) {
  TempDir dir;
  const auto f = gen_random_tensor({2, 2, 2}, 1.0, 1, dir / "a.coo");
  EXPECT_EQ(f.nnz, 8u);
  std::istringstream lines(slurp(dir / "a.coo"));
  std::size_t n = 0;
  for (std::string l; std::getline(lines, l);) ++n;
  EXPECT_EQ(n, 8u);
  gen_random_tensor({7, 8, 9}, 0.2, 5, dir / "b.coo");
  gen_random_tensor({7, 8, 9}, 0.2, 5, dir / "c.coo");
  EXPECT_EQ(slurp(dir / "b.coo"), slurp(dir / "c.coo"));
  gen_random_tensor({7, 8, 9}, 0.2, 6, dir / "d.coo");
  EXPECT_NE(slurp(dir / "b.coo"), slurp(dir / "d.coo"));
  EXPECT_THROW(gen_random_tensor({2, 2}, 0.0, 1, dir / "e.coo"), std::invalid_argument);
  EXPECT_THROW(gen_random_tensor({2, 2}, 1.5, 1, dir / "e.coo"), std::invalid_argument);
}

TEST(Generator, CountWithinThreeSigmaAndValuesInUnitInterval) {
  TempDir dir;
  const auto f = gen_random_tensor({100, 110, 120}, 0.1, 3, dir / "a.coo");
  const double m = 100.0 * 110 * 120, p = 0.1;
  EXPECT_LE(std::abs(double(f.nnz) - p * m), 3 * std::sqrt(p * (1 - p) * m));
  const auto parsed = parse_coo(f.path, f.dims);
  EXPECT_EQ(parsed.nnz, f.nnz);
  const auto x = load_sparse(parsed);
  for (double v : x.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Run, HooiExactInputWritesContainer) {
  TempDir dir;
  const auto e = oracle::exact_tensor({10, 9, 8}, {2, 3, 2}, 1);
  const auto f = oracle::write_coo(e.x, dir / "x.coo");
  auto c = config_for(Algorithm::hooi, f, {2, 3, 2}, dir);
  c.output = dir / "m.tkrd";
  const auto o = run(c);
  EXPECT_GE(o.metrics.fit, 1 - 1e-6);
  EXPECT_EQ(o.metrics.nnz, f.nnz);
  EXPECT_EQ(o.metrics.output_bytes, std::filesystem::file_size(c.output));
  EXPECT_TRUE(load_model(c.output) == o.result.model);
  EXPECT_GT(o.metrics.peak_bytes, 0u);
}

TEST(Run, SpAndMpShareStoresAndBookkeeping) {
  TempDir dir;
  const auto f = gen_random_tensor({12, 11, 10}, 0.2, 2, dir / "x.coo");
  const auto sp = run(config_for(Algorithm::sp, f, {3, 3, 3}, dir));
  const auto mp = run(config_for(Algorithm::mp, f, {3, 3, 3}, dir));
  EXPECT_EQ(sp.metrics.nnz, mp.metrics.nnz);
  EXPECT_EQ(sp.metrics.dims, mp.metrics.dims);
  EXPECT_NE(sp.metrics.fit, mp.metrics.fit);
  EXPECT_GT(sp.metrics.store_bytes, 0u);
  // mp reopened the stores sp built: nothing was sorted the second time
  EXPECT_LT(mp.metrics.prepare_peak_bytes, sp.metrics.prepare_peak_bytes);
  std::size_t dirs = 0;
  for (auto& entry : std::filesystem::directory_iterator(dir / "work")) dirs += entry.is_directory();
  EXPECT_EQ(dirs, 1u);
}

TEST(Run, RejectsBadInput) {
  TempDir dir;
  const auto f = gen_random_tensor({5, 5}, 0.5, 2, dir / "x.coo");
  EXPECT_THROW(run(config_for(Algorithm::sp, f, {2, 2}, dir)), std::invalid_argument);
  EXPECT_THROW(run(config_for(Algorithm::hooi, f, {6, 2}, dir)), std::invalid_argument);
  EXPECT_THROW(parse_algorithm("cp"), std::invalid_argument);
}

TEST(Run, MetricsJsonFields) {
  TempDir dir;
  const auto f = gen_random_tensor({6, 6, 6}, 0.3, 3, dir / "x.coo");
  const auto o = run(config_for(Algorithm::hosvd, f, {2, 2, 2}, dir));
  const auto j = metrics_json(o.metrics);
  for (const char* key : {"\"algorithm\"", "\"fit\"", "\"iterations\"", "\"peak_bytes\"", "\"nnz\"", "\"seconds\""})
    EXPECT_NE(j.find(key), std::string::npos) << key;
}

TEST(Formatting, DimsAndSizes) {
  EXPECT_EQ(parse_dims("60x60x60"), (Dims{60, 60, 60}));
  EXPECT_EQ(parse_dims("3,4 5"), (Dims{3, 4, 5}));
  EXPECT_EQ(format_dims({3, 4, 5}), "3x4x5");
  EXPECT_EQ(parse_byte_size("4M"), std::size_t{4} << 20);
  EXPECT_EQ(parse_byte_size("1024"), 1024u);
  EXPECT_THROW(parse_dims(""), std::invalid_argument);
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3)), 1.0 / 3);
}

TEST(BenchSpec, ParsesBlocksAndGlobals) {
  std::istringstream in(
      "# comment\n"
      "seeds = 1..3, 7\n"
      "algorithms = hosvd, sp\n"
      "max_iters = 20\n"
      "sort_buffer = 2M\n"
      "instance = tiny\n"
      "  dims = 5x6x7\n"
      "  core = 2x2x2\n"
      "sweep = size\n"
      "  sides = 20, 40\n"
      "sweep = ratio\n"
      "  side = 30\n"
      "  middle = 5\n"
      "  ratios = 5, 1, 0.2\n"
      "sweep = core4\n"
      "  side = 10\n"
      "  core_sides = 2, 5\n");
  const auto s = parse_bench_spec(in);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{1, 2, 3, 7}));
  EXPECT_EQ(s.algorithms.size(), 2u);
  EXPECT_EQ(s.convergence.max_iterations, 20u);
  EXPECT_EQ(s.sort_buffer_bytes, std::size_t{2} << 20);
  ASSERT_EQ(s.instances.size(), 1u + 2 + 3 + 2);
  EXPECT_EQ(s.instances[1].core, (Dims{2, 2, 2}));
  EXPECT_EQ(s.instances[2].core, (Dims{4, 4, 4}));
  EXPECT_EQ(s.instances[3].core, (Dims{25, 5, 1}));
  EXPECT_EQ(s.instances[5].core, (Dims{1, 5, 25}));
  EXPECT_EQ(s.instances[7].dims, (Dims{10, 10, 10, 10}));
  EXPECT_EQ(s.instances[7].core, (Dims{5, 5, 5, 5}));
}

TEST(BenchSpec, MalformedNamesLine) {
  for (const auto& [text, line] : {std::pair<std::string, int>{"seeds = 1\nbogus\n", 2},
                                   {"instance = a\n dims = 4x4x4\n", 1},
                                   {"instance = a\n dims = 4x4x4\n core = 5x1x1\n", 1},
                                   {"sweep = spiral\n", 1},
                                   {"seeds = 3..1\n", 1},
                                   {"instance = a\n dims = 4x4x4\n core = 2x2x2\n colour = red\n", 4}}) {
    std::istringstream in(text);
    try {
      parse_bench_spec(in, "s");
      ADD_FAILURE() << "accepted: " << text;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("s:" + std::to_string(line) + ":"), std::string::npos) << e.what();
    }
  }
  std::istringstream empty("seeds = 1\n");
  EXPECT_THROW(parse_bench_spec(empty), std::invalid_argument);
}

TEST(Bench, SingleInstanceRowCountAndDeterminism) {
  TempDir dir;
  std::istringstream in("seeds = 1,2\nalgorithms = hosvd, hooi, sp, mp\ninstance = a\n dims = 8x7x6\n core = 2x2x2\n");
  auto spec = parse_bench_spec(in);
  spec.work_dir = dir / "w1";
  spec.sort_buffer_bytes = min_sort_buffer_bytes;
  const auto rows = run_bench(spec);
  EXPECT_EQ(rows.size(), 8u);
  std::ostringstream a, b, c;
  write_bench_csv(a, rows, true);
  spec.work_dir = dir / "w2";
  write_bench_csv(b, run_bench(spec), true);
  BenchOptions par;
  par.jobs = 3;
  par.deterministic = true;
  spec.work_dir = dir / "w3";
  write_bench_csv(c, run_bench(spec, par), true);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str(), c.str());
  std::istringstream back(a.str());
  const auto csv = read_csv(back);
  ASSERT_EQ(csv.size(), 9u);
  EXPECT_EQ(csv[0], bench_csv_header());
  EXPECT_NE(a.str().find("\r\n"), std::string::npos);
}

TEST(Csv, QuotingRoundTrip) {
  std::istringstream in("a,b\r\n\"x, y\",\"he said \"\"hi\"\"\"\r\n");
  const auto rows = read_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][0], "x, y");
  EXPECT_EQ(rows[1][1], "he said \"hi\"");
  std::istringstream bad("a,\"b\n");
  EXPECT_THROW(read_csv(bad), std::invalid_argument);
}

TEST(Aggregate, RelativeFitOverHosvd) {
  TempDir dir;
  std::istringstream in("seeds = 1,2\nalgorithms = hosvd, hooi\ninstance = a\n dims = 9x8x7\n core = 2x2x2\n");
  auto spec = parse_bench_spec(in);
  spec.work_dir = dir / "w";
  const auto rows = run_bench(spec);
  std::ostringstream csv;
  write_bench_csv(csv, rows, true);
  std::istringstream back(csv.str());
  std::ostringstream agg;
  write_aggregate_csv(agg, read_csv(back));
  std::istringstream agg_in(agg.str());
  const auto table = read_csv(agg_in);
  ASSERT_EQ(table.size(), 3u);
  const auto& h = table[0];
  const auto col = [&](const char* name) { return std::find(h.begin(), h.end(), name) - h.begin(); };
  double rel = 0;
  for (int s = 0; s < 2; ++s) {
    const double base = rows[2 * s].metrics.fit, hf = rows[2 * s + 1].metrics.fit;
    rel += 100 * (hf - base) / base / 2;
  }
  for (std::size_t r = 1; r < table.size(); ++r) {
    if (table[r][col("algorithm")] == "hooi") EXPECT_NEAR(std::stod(table[r][col("mean_relative_fit_pct")]), rel, 1e-9);
    if (table[r][col("algorithm")] == "hosvd") EXPECT_EQ(std::stod(table[r][col("mean_relative_fit_pct")]), 0.0);
  }
}

TEST(Bench, SelfTestConfigMpAboveSp) {
  TempDir dir;
  std::istringstream in("seeds = 1..5\nalgorithms = sp, mp\ninstance = selftest\n dims = 100x110x120\n core = 10x11x12\n");
  auto spec = parse_bench_spec(in);
  spec.work_dir = dir / "w";
  spec.sort_buffer_bytes = std::size_t{16} << 20;
  double sp = 0, mp = 0;
  for (const auto& row : run_bench(spec)) {
    EXPECT_EQ(row.metrics.terminated_by, "threshold");
    (row.metrics.algorithm == "sp" ? sp : mp) += row.metrics.fit / 5;
  }
  EXPECT_GT(mp, sp);
}
