#pragma once

// A Tucker model and its binary container.
//
// Container layout (integers little-endian u64, reals little-endian f64):
//   "TKRD" | version | N | dims[N] | core dims[N] |
//   core values (mode-0 index fastest) |
//   factor 0 .. factor N-1 (each I_n x J_n, column-major) |
//   CRC-32 of all preceding bytes (u32)

#include <filesystem>
#include <vector>

#include "tucker/tensor.hpp"

namespace tucker {

inline constexpr std::uint64_t model_format_version = 1;

struct TuckerModel {
  Tensor core;
  std::vector<MatrixXd> factors;

  std::size_t order() const { return factors.size(); }
  Dims dims() const;
  Dims core_dims() const { return core.dims(); }

  /// Throws std::invalid_argument unless factor n is I_n x J_n for every mode.
  void validate() const;
  Tensor reconstruct() const { return tucker_apply(core, factors); }

  bool operator==(const TuckerModel& other) const;
};

/// max over modes of ‖AᵀA − I‖_max.
double orthonormality_error(const TuckerModel& model);

void save_model(const std::filesystem::path& path, const TuckerModel& model);
TuckerModel load_model(const std::filesystem::path& path);

}  // namespace tucker
