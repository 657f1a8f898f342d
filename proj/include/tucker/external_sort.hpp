#pragma once

// Stable external merge sort of COO text files, keyed on one or two index
// columns. Equivalent to `sort -n -s -k<c>,<c>` (and, for two keys, a
// lexicographic sort on both). Lines are copied verbatim except that a
// trailing CR is dropped and blank lines are skipped.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "tucker/coo.hpp"

namespace tucker {

inline constexpr std::size_t min_sort_buffer_bytes = std::size_t{1} << 20;
inline constexpr std::size_t default_sort_buffer_bytes = std::size_t{256} << 20;

struct SortOptions {
  /// Upper bound on the tracked bytes of one in-memory run (line text plus
  /// per-line bookkeeping). Must be at least min_sort_buffer_bytes.
  std::size_t buffer_bytes = default_sort_buffer_bytes;
  /// Directory for run files; defaults to the output file's directory.
  std::filesystem::path temp_dir;
};

struct SortStats {
  std::uint64_t records = 0;
  std::size_t runs = 0;
};

/// Sorts by the given 0-based modes, most significant first (one or two modes).
SortStats external_sort(const CooFile& input, std::span<const std::size_t> key_modes,
                        const std::filesystem::path& output, const SortOptions& options = {});

inline SortStats external_sort_by_mode(const CooFile& input, std::size_t mode, const std::filesystem::path& output,
                                       const SortOptions& options = {}) {
  const std::size_t keys[] = {mode};
  return external_sort(input, keys, output, options);
}

}  // namespace tucker
