#pragma once

// Coordinate-format sparse tensors: the text input format and an in-RAM
// representation.
//
// Text format: one nonzero per line, N whitespace-separated 1-based integer
// indices followed by one decimal real. LF or CRLF line endings; blank lines
// are ignored.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tucker/memory.hpp"
#include "tucker/tensor.hpp"

namespace tucker {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::filesystem::path& path, std::uint64_t line, const std::string& message)
      : std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + message), line_(line) {}
  std::uint64_t line() const { return line_; }

 private:
  std::uint64_t line_;
};

struct CooRecord {
  std::array<Index, max_order> index{};  // 1-based
  double value = 0.0;
};

/// Parses one line. Returns nullopt for a blank line; throws std::invalid_argument
/// with a message (no location) when the line is malformed or out of range.
std::optional<CooRecord> parse_coo_line(std::string_view line, const Dims& dims);

/// Appends the text form of a record, without the trailing newline.
void format_coo_line(std::string& out, std::span<const Index> index_one_based, double value);

/// Calls `fn(record, line_number)` for every nonzero line of a COO file.
/// Malformed lines raise ParseError naming the file and line.
void for_each_coo_record(const std::filesystem::path& path, const Dims& dims,
                         const std::function<void(const CooRecord&, std::uint64_t)>& fn);

struct CooFile {
  std::filesystem::path path;
  Dims dims;
  std::uint64_t nnz = 0;  // lines with a nonzero value
  std::uint64_t records = 0;  // all data lines, including explicit zeros

  std::size_t order() const { return dims.size(); }
};

struct CooParseOptions {
  /// Duplicate detection keeps one 64-bit key per record in memory.
  bool check_duplicates = true;
};

/// Validates a COO file against declared dims and counts its nonzeros.
CooFile parse_coo(const std::filesystem::path& path, Dims dims, const CooParseOptions& options = {});

/// In-RAM sparse tensor. Entries are kept in lexicographic index order with
/// mode 0 most significant, so mode-0 slices are contiguous. Explicit zeros
/// are never stored and coordinates are unique.
class SparseTensor {
 public:
  SparseTensor() = default;
  explicit SparseTensor(Dims dims);

  /// Builds from unsorted 0-based entries; rejects duplicates and drops zeros.
  static SparseTensor from_entries(Dims dims, std::span<const Index> indices, std::span<const double> values);
  static SparseTensor from_dense(const Tensor& x);

  std::size_t order() const { return dims_.size(); }
  const Dims& dims() const { return dims_; }
  Index dim(std::size_t mode) const { return dims_.at(mode); }
  std::size_t nnz() const { return values_.size(); }

  /// 0-based index of entry k in the given mode.
  Index index(std::size_t k, std::size_t mode) const { return indices_[k * dims_.size() + mode]; }
  std::span<const Index> indices_of(std::size_t k) const { return {indices_.data() + k * dims_.size(), dims_.size()}; }
  double value(std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }

  double squared_norm() const;
  double norm() const;
  Tensor to_dense() const;

  /// Range [begin, end) of entries whose mode-0 index equals i.
  std::pair<std::size_t, std::size_t> mode0_slice(Index i) const;

 private:
  Dims dims_;
  memory::tracked_vector<Index> indices_;  // nnz x order, row-major
  memory::tracked_vector<double> values_;
  memory::tracked_vector<std::size_t> slice_offsets_;  // dims[0] + 1
  friend SparseTensor load_sparse(const CooFile&);
  void finalize();
};

SparseTensor load_sparse(const CooFile& file);

/// Writes a sparse tensor in the text format, entries in stored order.
void write_coo(const std::filesystem::path& path, const SparseTensor& x);

}  // namespace tucker
