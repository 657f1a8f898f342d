#pragma once

// On-disk slice stores: every slice of a tensor obtained by fixing one mode
// (order 3) or an ordered pair of modes (order 4), serialized as compressed
// sparse row matrices and grouped into slab files.
//
// A slice keeps the two remaining modes; its rows follow the lower-numbered
// remaining mode and its columns the higher one. For a pair of fixed modes
// (p, q) slices are enumerated row-major: slice s holds i_p = s / I_q,
// i_q = s % I_q.
//
// Slice record layout (all integers little-endian u64 unless noted):
//   "TSLC" | version | rows | cols | nnz | row offsets[rows + 1] |
//   column indices[nnz] (0-based) | values[nnz] (IEEE-754 f64, LE) |
//   CRC-32 of all preceding record bytes (u32)
// Slab files are plain concatenations of records. The store directory holds
// a `store.json` manifest with the layout and per-slab record offsets.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "tucker/coo.hpp"
#include "tucker/external_sort.hpp"
#include "tucker/memory.hpp"

namespace tucker {

inline constexpr std::uint64_t slice_format_version = 1;
inline constexpr std::size_t default_slab_target_bytes = std::size_t{64} << 20;

class SliceMatrix {
 public:
  using SparseView = Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>>;

  SliceMatrix() = default;
  SliceMatrix(Index rows, Index cols);  // all-zero slice

  /// Builds from unsorted 0-based triplets. Zeros are dropped; a repeated
  /// (row, col) pair throws std::invalid_argument.
  static SliceMatrix from_triplets(Index rows, Index cols, std::span<const Index> row_idx,
                                   std::span<const Index> col_idx, std::span<const double> values);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }

  std::span<const std::int64_t> row_offsets() const { return offsets_; }
  std::span<const std::int64_t> column_indices() const { return columns_; }
  std::span<const double> values() const { return values_; }

  SparseView view() const;
  MatrixXd to_dense() const;
  double squared_norm() const;
  std::size_t serialized_bytes() const;

  bool operator==(const SliceMatrix& other) const;

 private:
  friend void write_slice(std::ostream&, const SliceMatrix&);
  friend SliceMatrix read_slice(std::istream&, const std::string&);

  Index rows_ = 0;
  Index cols_ = 0;
  memory::tracked_vector<std::int64_t> offsets_ = memory::tracked_vector<std::int64_t>(1, 0);
  memory::tracked_vector<std::int64_t> columns_;
  memory::tracked_vector<double> values_;
};

void write_slice(std::ostream& out, const SliceMatrix& slice);
SliceMatrix read_slice(std::istream& in, const std::string& what);

/// Which modes a store holds fixed, and how slices are indexed.
struct SliceLayout {
  Dims dims;
  std::vector<std::size_t> fixed;  // ascending, 0-based
  std::size_t row_mode = 0;
  std::size_t col_mode = 0;

  static SliceLayout make(const Dims& dims, std::vector<std::size_t> fixed);

  Index slice_count() const;
  Index rows() const { return dims[row_mode]; }
  Index cols() const { return dims[col_mode]; }
  /// 0-based fixed-mode indices of slice s, in `fixed` order.
  std::vector<Index> fixed_indices(Index s) const;
  Index slice_number(std::span<const Index> fixed_idx) const;
};

struct SliceStoreInfo {
  std::uint64_t nnz = 0;
  Index empty_slices = 0;
  std::size_t largest_slice_bytes = 0;
  std::uint64_t disk_bytes = 0;
};

class SliceStore {
 public:
  static SliceStore open(const std::filesystem::path& dir);

  const SliceLayout& layout() const { return layout_; }
  const SliceStoreInfo& info() const { return info_; }
  const std::filesystem::path& directory() const { return dir_; }
  Index slice_count() const { return layout_.slice_count(); }
  Index slab_size() const { return slab_size_; }

  /// Loads slice s (0-based) with its own file handle; safe to call concurrently.
  SliceMatrix load(Index s) const;

  /// Streams every slice in ascending order, one slab file open at a time.
  void for_each(const std::function<void(Index, const SliceMatrix&)>& fn) const;

 private:
  std::filesystem::path slab_path(Index slab) const;

  std::filesystem::path dir_;
  SliceLayout layout_;
  SliceStoreInfo info_;
  Index slab_size_ = 1;
  std::vector<std::vector<std::uint64_t>> slab_offsets_;
};

inline SliceMatrix load_slice(const SliceStore& store, Index s) { return store.load(s); }

struct StoreBuildOptions {
  /// Consecutive slices per slab file; 0 picks a size of roughly
  /// default_slab_target_bytes per slab.
  Index slab_size = 0;
  SortOptions sort;
};

/// Sorts the input by the fixed modes and writes one slice per fixed index
/// tuple into `dir`. Peak tracked memory is the sort buffer plus one slice.
SliceStore build_slice_store(const CooFile& input, std::span<const std::size_t> fixed_modes,
                             const std::filesystem::path& dir, const StoreBuildOptions& options = {});

/// Stores for several fixed-mode sets, keyed by the fixed modes.
class SliceStoreSet {
 public:
  void add(SliceStore store);
  bool contains(const std::vector<std::size_t>& fixed) const { return stores_.count(fixed) != 0; }
  const SliceStore& get(const std::vector<std::size_t>& fixed) const;
  /// Store whose remaining (row, col) modes are {a, b}.
  const SliceStore& for_remaining(std::size_t a, std::size_t b) const;
  bool has_remaining(std::size_t a, std::size_t b) const;
  const Dims& dims() const;
  std::size_t size() const { return stores_.size(); }
  bool any_empty_slices() const;

  auto begin() const { return stores_.begin(); }
  auto end() const { return stores_.end(); }

 private:
  std::map<std::vector<std::size_t>, SliceStore> stores_;
};

/// Fixed-mode set that leaves modes {a, b} free.
std::vector<std::size_t> fixed_modes_leaving(std::size_t order, std::size_t a, std::size_t b);

/// Every fixed-mode set of the given order (3 sets for order 3, 6 for order 4).
std::vector<std::vector<std::size_t>> all_fixed_mode_sets(std::size_t order);

/// Directory name used for a fixed-mode set, e.g. "mode-1" or "modes-1-2" (1-based).
std::string store_directory_name(std::span<const std::size_t> fixed);

/// Builds (or reopens, when a matching manifest exists) one store per set
/// under `root`, sequentially, sharing one sort buffer size.
SliceStoreSet prepare_slice_stores(const CooFile& input, const std::vector<std::vector<std::size_t>>& fixed_sets,
                                   const std::filesystem::path& root, const StoreBuildOptions& options = {});

}  // namespace tucker
