#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "tucker/coo.hpp"
#include "tucker/external_sort.hpp"
#include "tucker/slice_store.hpp"

using namespace tucker;
using fixture::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

// Random records with many repeated keys, written as text.
CooFile random_records(const std::filesystem::path& p, const Dims& dims, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  for (std::size_t r = 0; r < count; ++r) {
    for (Index d : dims) out << (1 + rng() % d) << ' ';
    out << r << ".5\n";
  }
  return CooFile{p, dims, count, count};
}

std::vector<std::string> stable_sorted(std::vector<std::string> lines, std::vector<std::size_t> keys) {
  auto key = [&](const std::string& l) {
    std::istringstream s(l);
    std::vector<long> cols(4);
    for (auto& c : cols) s >> c;
    std::vector<long> k;
    for (auto m : keys) k.push_back(cols[m]);
    return k;
  };
  std::stable_sort(lines.begin(), lines.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return lines;
}

}  // namespace

TEST(ParseCoo, CountsNonzeros) {
  TempDir dir;
  write_file(dir / "a.coo", "1 1 1 0.5\n2 2 2 1.0");
  const auto f = parse_coo(dir / "a.coo", {2, 2, 2});
  EXPECT_EQ(f.nnz, 2u);
}

TEST(ParseCoo, CrlfBlankAndZeros) {
  TempDir dir;
  write_file(dir / "a.coo", "1 1 1 0.5\r\n\r\n2 2 2 0\r\n1 2 1 -3e-2\r\n");
  const auto f = parse_coo(dir / "a.coo", {2, 2, 2});
  EXPECT_EQ(f.nnz, 2u);
  EXPECT_EQ(f.records, 3u);
}

TEST(ParseCoo, RangeErrorNamesLine) {
  TempDir dir;
  write_file(dir / "a.coo", "3 1 1 0.5\n");
  try {
    parse_coo(dir / "a.coo", {2, 2, 2});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ParseCoo, MalformedLines) {
  TempDir dir;
  for (const char* bad : {"1 1 x 0.5\n", "1 1 0.5\n", "1 1 1 abc\n", "1 1 1 0.5 7\n", "0 1 1 1\n", "1 1 1 nan\n"}) {
    write_file(dir / "a.coo", std::string("1 1 1 1\n") + bad);
    try {
      parse_coo(dir / "a.coo", {2, 2, 2});
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << bad;
    }
  }
}

TEST(ParseCoo, Duplicates) {
  TempDir dir;
  write_file(dir / "a.coo", "1 2 1 0.5\n2 2 2 1\n1 2 1 0.25\n");
  EXPECT_THROW(parse_coo(dir / "a.coo", {2, 2, 2}), ParseError);
  CooParseOptions lax;
  lax.check_duplicates = false;
  const auto f = parse_coo(dir / "a.coo", {2, 2, 2}, lax);
  EXPECT_THROW(load_sparse(f), std::invalid_argument);
}

TEST(ParseCoo, GeneratorCountWithinThreeSigma) {
  // Same cell-by-cell Bernoulli model as the harness generator, binomial oracle.
  const Tensor x = oracle::random_sparse({100, 110, 120}, 0.1, 5);
  std::size_t nnz = 0;
  for (double v : x.values()) nnz += v != 0.0;
  const double m = 100.0 * 110 * 120, p = 0.1;
  EXPECT_LE(std::abs(double(nnz) - p * m), 3 * std::sqrt(p * (1 - p) * m));
}

TEST(SparseTensor, DenseRoundTripAndSlices) {
  const Tensor x = oracle::random_sparse({5, 4, 3}, 0.3, 2);
  const auto s = SparseTensor::from_dense(x);
  EXPECT_EQ(s.to_dense(), x);
  EXPECT_NEAR(s.norm(), oracle::norm(x), 1e-14);
  std::size_t covered = 0;
  for (Index i = 0; i < 5; ++i) {
    const auto [b, e] = s.mode0_slice(i);
    for (std::size_t k = b; k < e; ++k) EXPECT_EQ(s.index(k, 0), i);
    covered += e - b;
  }
  EXPECT_EQ(covered, s.nnz());
}

TEST(SparseTensor, FileRoundTrip) {
  TempDir dir;
  const Tensor x = oracle::random_sparse({6, 7, 3, 2}, 0.2, 3);
  const auto f = oracle::write_coo(x, dir / "x.coo", 5);
  const auto loaded = load_sparse(parse_coo(f.path, f.dims));
  EXPECT_EQ(loaded.to_dense(), x);
  write_coo(dir / "y.coo", loaded);
  EXPECT_EQ(load_sparse(parse_coo(dir / "y.coo", f.dims)).to_dense(), x);
}

TEST(ExternalSort, StableOnTies) {
  TempDir dir;
  write_file(dir / "a.coo", "1 3 1 0.1\n2 1 1 0.2\n1 2 2 0.3\n2 3 1 0.4\n1 1 2 0.5\n");
  const CooFile in{dir / "a.coo", {2, 3, 2}, 5, 5};
  external_sort_by_mode(in, 1, dir / "s.coo", SortOptions{min_sort_buffer_bytes, {}});
  const std::vector<std::string> expect{"2 1 1 0.2", "1 1 2 0.5", "1 2 2 0.3", "1 3 1 0.1", "2 3 1 0.4"};
  EXPECT_EQ(read_lines(dir / "s.coo"), expect);
}

TEST(ExternalSort, SortedInputUnchanged) {
  TempDir dir;
  const auto in = random_records(dir / "a.coo", {9, 9, 9}, 500, 1);
  external_sort_by_mode(in, 0, dir / "s1.coo");
  const CooFile sorted{dir / "s1.coo", in.dims, 500, 500};
  external_sort_by_mode(sorted, 0, dir / "s2.coo");
  EXPECT_EQ(read_lines(dir / "s1.coo"), read_lines(dir / "s2.coo"));
  EXPECT_EQ(read_lines(dir / "a.coo").size(), 500u);  // input untouched
}

TEST(ExternalSort, ManyRunsMatchInMemoryStableSort) {
  TempDir dir;
  const auto in = random_records(dir / "a.coo", {30, 40, 50, 7}, 60000, 2);
  const auto original = read_lines(in.path);
  for (std::vector<std::size_t> keys : {std::vector<std::size_t>{2}, {1, 3}}) {
    const auto stats = external_sort(in, keys, dir / "s.coo", SortOptions{min_sort_buffer_bytes, dir.path()});
    EXPECT_GE(stats.runs, 2u);
    EXPECT_EQ(stats.records, 60000u);
    EXPECT_EQ(read_lines(dir / "s.coo"), stable_sorted(original, keys));
  }
  EXPECT_EQ(read_lines(in.path), original);
}

TEST(ExternalSort, PeakWithinBuffer) {
  TempDir dir;
  const auto in = random_records(dir / "a.coo", {30, 40, 50}, 80000, 3);
  memory::PeakScope scope;
  external_sort_by_mode(in, 0, dir / "s.coo", SortOptions{min_sort_buffer_bytes, {}});
  EXPECT_LE(scope.peak_bytes(), min_sort_buffer_bytes + 64 * 1024);
}

TEST(ExternalSort, Errors) {
  TempDir dir;
  const auto in = random_records(dir / "a.coo", {3, 3, 3}, 10, 4);
  EXPECT_THROW(external_sort_by_mode(in, 0, dir / "s.coo", SortOptions{1024, {}}), std::invalid_argument);
  EXPECT_THROW(external_sort_by_mode(in, 3, dir / "s.coo"), std::invalid_argument);
  write_file(dir / "b.coo", "1 1 1 1\n1 q 1 1\n");
  EXPECT_THROW(external_sort_by_mode(CooFile{dir / "b.coo", {3, 3, 3}, 2, 2}, 0, dir / "s.coo"), ParseError);
}

TEST(SliceMatrix, TripletsAndInvariants) {
  const std::vector<Index> r{2, 0, 2, 1}, c{1, 3, 0, 2};
  const std::vector<double> v{1.5, 2.0, 0.0, -1.0};
  const auto s = SliceMatrix::from_triplets(3, 4, r, c, v);
  EXPECT_EQ(s.nnz(), 3);  // the zero is dropped
  MatrixXd expect = MatrixXd::Zero(3, 4);
  expect(2, 1) = 1.5;
  expect(0, 3) = 2.0;
  expect(1, 2) = -1.0;
  EXPECT_EQ(s.to_dense(), expect);
  EXPECT_EQ(MatrixXd(s.view()), expect);
  const auto off = s.row_offsets();
  for (std::size_t i = 1; i < off.size(); ++i) EXPECT_LE(off[i - 1], off[i]);
  const std::vector<Index> dr{0, 0}, dc{1, 1};
  const std::vector<double> dv{1, 2};
  EXPECT_THROW(SliceMatrix::from_triplets(2, 2, dr, dc, dv), std::invalid_argument);
}

TEST(SliceMatrix, SerializationRoundTrip) {
  std::mt19937_64 rng(6);
  std::stringstream buf;
  std::vector<SliceMatrix> written;
  for (int k = 0; k < 1000; ++k) {
    const Index rows = 1 + rng() % 9, cols = 1 + rng() % 9;
    std::vector<Index> r, c;
    std::vector<double> v;
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (rng() % 3 == 0) {
          r.push_back(i);
          c.push_back(j);
          v.push_back(std::ldexp(double(rng() >> 11), -53) - 0.5);
        }
    written.push_back(SliceMatrix::from_triplets(rows, cols, r, c, v));
    write_slice(buf, written.back());
  }
  write_slice(buf, SliceMatrix(4, 5));
  for (const auto& w : written) EXPECT_TRUE(read_slice(buf, "buf") == w);
  const auto empty = read_slice(buf, "buf");
  EXPECT_EQ(empty.rows(), 4);
  EXPECT_EQ(empty.cols(), 5);
  EXPECT_EQ(empty.nnz(), 0);
}

TEST(SliceMatrix, ChecksumMismatch) {
  std::stringstream buf;
  const std::vector<Index> r{0}, c{0};
  const std::vector<double> v{1.0};
  write_slice(buf, SliceMatrix::from_triplets(1, 1, r, c, v));
  std::string bytes = buf.str();
  bytes[bytes.size() - 10] ^= 0x01;  // inside the values array
  std::stringstream bad(bytes);
  EXPECT_THROW(read_slice(bad, "bad"), std::runtime_error);
}

TEST(SliceLayout, RowsFollowLowerRemainingMode) {
  const auto l = SliceLayout::make({2, 3, 4, 5}, {1, 3});
  EXPECT_EQ(l.row_mode, 0u);
  EXPECT_EQ(l.col_mode, 2u);
  EXPECT_EQ(l.slice_count(), 15);
  EXPECT_EQ(l.fixed_indices(7), (std::vector<Index>{1, 2}));
  const Index idx[] = {1, 2};
  EXPECT_EQ(l.slice_number(idx), 7);
  EXPECT_THROW(SliceLayout::make({2, 3, 4}, {0, 1}), std::invalid_argument);
  EXPECT_THROW(SliceLayout::make({2, 3}, {}), std::invalid_argument);
}

TEST(SliceStore, TwoRecordExample) {
  TempDir dir;
  write_file(dir / "a.coo", "1 1 1 0.25\n2 1 1 0.75\n");
  const auto f = parse_coo(dir / "a.coo", {2, 2, 2});
  const std::size_t fixed[] = {0};
  const auto store = build_slice_store(f, fixed, dir / "m1", fixture::small_build(1));
  ASSERT_EQ(store.slice_count(), 2);
  const auto s0 = load_slice(store, 0), s1 = load_slice(store, 1);
  EXPECT_EQ(s0.nnz(), 1);
  EXPECT_EQ(s0.to_dense()(0, 0), 0.25);
  EXPECT_EQ(s1.to_dense()(0, 0), 0.75);
  EXPECT_THROW(store.load(2), std::out_of_range);
}

TEST(SliceStore, EmptySlice) {
  TempDir dir;
  write_file(dir / "a.coo", "1 1 1 1\n3 2 2 2\n");
  const auto f = parse_coo(dir / "a.coo", {3, 2, 2});
  const std::size_t fixed[] = {0};
  const auto store = build_slice_store(f, fixed, dir / "m1");
  const auto s = store.load(1);
  EXPECT_EQ(s.rows(), 2);
  EXPECT_EQ(s.cols(), 2);
  EXPECT_EQ(s.nnz(), 0);
  EXPECT_EQ(store.info().empty_slices, 1);
}

TEST(SliceStore, ReassemblyEveryStoreOrder3And4) {
  for (const Dims& d : {Dims{20, 30, 40}, Dims{6, 7, 8, 5}}) {
    TempDir dir;
    const Tensor x = oracle::random_sparse(d, 0.1, 11);
    const auto set = fixture::all_stores_for(x, dir, 4);
    std::size_t nnz = 0;
    for (Index v = 0; v < x.size(); ++v) nnz += x.data()[v] != 0.0;
    for (const auto& [fixed, store] : set) {
      Tensor back(d);
      double sq = 0.0;
      std::uint64_t count = 0;
      store.for_each([&](Index s, const SliceMatrix& m) {
        EXPECT_TRUE(m == store.load(s));
        const auto at = store.layout().fixed_indices(s);
        EXPECT_EQ(m.to_dense(), oracle::slice(x, fixed, at));
        std::vector<Index> idx(d.size());
        for (std::size_t k = 0; k < fixed.size(); ++k) idx[fixed[k]] = at[k];
        const MatrixXd dm = m.to_dense();
        for (Index r = 0; r < dm.rows(); ++r)
          for (Index c = 0; c < dm.cols(); ++c) {
            idx[store.layout().row_mode] = r;
            idx[store.layout().col_mode] = c;
            back.at(idx) = dm(r, c);
          }
        sq += m.squared_norm();
        count += m.nnz();
      });
      EXPECT_EQ(back, x) << store_directory_name(fixed);
      EXPECT_EQ(count, nnz);
      EXPECT_EQ(store.info().nnz, nnz);
      EXPECT_NEAR(std::sqrt(sq), oracle::norm(x), 1e-12 * oracle::norm(x));
    }
  }
}

TEST(SliceStore, BuildPeakBoundedBySortBufferPlusSlice) {
  TempDir dir;
  const Tensor x = oracle::random_sparse({40, 40, 40}, 0.1, 12);
  const auto coo = oracle::write_coo(x, dir / "x.coo", 3);
  memory::PeakScope scope;
  const std::size_t fixed[] = {1};
  const auto store = build_slice_store(coo, fixed, dir / "m2", fixture::small_build(0));
  EXPECT_LE(scope.peak_bytes(), min_sort_buffer_bytes + 2 * store.info().largest_slice_bytes);
}

TEST(SliceStore, ReopenAndReuse) {
  TempDir dir;
  const Tensor x = oracle::random_sparse({5, 6, 7}, 0.3, 13);
  const auto coo = oracle::write_coo(x, dir / "x.coo");
  const auto sets = all_fixed_mode_sets(3);
  const auto a = prepare_slice_stores(coo, sets, dir / "st", fixture::small_build(2));
  const auto stamp = std::filesystem::last_write_time(dir / "st" / "mode-1" / "store.json");
  const auto b = prepare_slice_stores(coo, sets, dir / "st", fixture::small_build(2));
  EXPECT_EQ(std::filesystem::last_write_time(dir / "st" / "mode-1" / "store.json"), stamp);
  EXPECT_EQ(b.size(), 3u);
  for (Index s = 0; s < 5; ++s) EXPECT_TRUE(a.get({0}).load(s) == b.get({0}).load(s));
  const auto reopened = SliceStore::open(dir / "st" / "mode-3");
  EXPECT_EQ(reopened.layout().row_mode, 0u);
  EXPECT_EQ(reopened.layout().col_mode, 1u);
  EXPECT_THROW(SliceStore::open(dir / "nowhere"), std::runtime_error);
}

TEST(SliceStore, CorruptSlabDetected) {
  TempDir dir;
  const Tensor x = oracle::random_sparse({4, 5, 6}, 0.5, 14);
  const auto coo = oracle::write_coo(x, dir / "x.coo");
  const std::size_t fixed[] = {0};
  const auto store = build_slice_store(coo, fixed, dir / "m1", fixture::small_build(4));
  const auto slab = dir / "m1" / "slab-000000.tslc";
  std::fstream f(slab, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(60);
  char c;
  f.read(&c, 1);
  f.seekp(60);
  c ^= 0x10;
  f.write(&c, 1);
  f.close();
  EXPECT_THROW(store.load(0), std::runtime_error);
}

TEST(SliceStoreSet, Helpers) {
  EXPECT_EQ(fixed_modes_leaving(3, 2, 0), (std::vector<std::size_t>{1}));
  EXPECT_EQ(fixed_modes_leaving(4, 1, 3), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(all_fixed_mode_sets(3).size(), 3u);
  EXPECT_EQ(all_fixed_mode_sets(4).size(), 6u);
  const std::size_t pair[] = {0, 1};
  EXPECT_EQ(store_directory_name(pair), "modes-1-2");
}
