#pragma once

// Tucker decomposition drivers. HO-SVD and HOOI work on an in-RAM sparse
// tensor; SP (slice projection) and MP (multislice projection) stream slices
// from on-disk stores and never hold the whole tensor.
//
// Modes are 0-based throughout this API.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tucker/coo.hpp"
#include "tucker/linalg.hpp"
#include "tucker/model.hpp"
#include "tucker/slice_store.hpp"

namespace tucker {

struct ConvergenceConfig {
  double fit_threshold = 1e-4;
  double core_growth_threshold = 1e-4;
  std::size_t max_iterations = 50;

  void validate() const;
};

enum class Termination { threshold, max_iterations, single_pass };

const char* to_string(Termination t);

struct RunResult {
  TuckerModel model;
  /// One value per sweep: the fit for HOOI and MP, the core growth for SP,
  /// the single fit for HO-SVD.
  std::vector<double> fit_history;
  std::size_t iterations = 0;
  Termination terminated_by = Termination::threshold;
  double fit = 0.0;  // final fit of `model` against the input
  bool rank_deficient = false;  // some factor needed orthonormal completion
  bool has_empty_slices = false;

  bool operator==(const RunResult& other) const;
};

/// Gram matrix produced while updating one factor; iteration 0 is initialization.
struct GramEvent {
  std::size_t iteration;
  std::size_t mode;
  const MatrixXd& gram;
  const MatrixXd& factor;
};

struct SweepEvent {
  std::size_t iteration;
  const TuckerModel& model;
  double measure;  // the value appended to fit_history
  std::optional<double> fit;
};

struct IterationObserver {
  std::function<void(const GramEvent&)> on_gram;
  std::function<void(const SweepEvent&)> on_sweep;
};

enum class HooiFitMethod {
  streaming,      // residual summed slice by slice
  norm_identity,  // ‖x‖² − 2⟨x, x̂⟩ + ‖G‖², inner product over nonzeros only
};

struct DecompOptions {
  EigenOptions eigen;
  std::uint64_t seed = 0;              // SP random initialization
  std::vector<std::size_t> sp_order;   // SP update order, empty means 0, 1, ..., N-1
  bool sp_track_fit = false;           // compute SP's fit after every sweep too
  HooiFitMethod hooi_fit = HooiFitMethod::streaming;
  const IterationObserver* observer = nullptr;
};

/// Throws std::invalid_argument for a bad order or core dimension.
void check_core_dims(const Dims& dims, const Dims& core_dims);

/// X_(n) X_(n)ᵀ accumulated from the nonzeros.
MatrixXd mode_gram(const SparseTensor& x, std::size_t mode);

/// x ×_mode aᵀ as a dense tensor; a is I_mode x J.
Tensor sparse_mode_product_t(const SparseTensor& x, const MatrixXd& a, std::size_t mode);

/// x multiplied by factors[m]ᵀ in every mode except `skip` (pass order() to skip none).
Tensor project(const SparseTensor& x, std::span<const MatrixXd> factors, std::size_t skip);

/// Fit of a model against a sparse tensor, summed over mode-0 slices.
double sparse_fit(const SparseTensor& x, const TuckerModel& model, HooiFitMethod method = HooiFitMethod::streaming);

TuckerModel ho_svd(const SparseTensor& x, const Dims& core_dims, const EigenOptions& eigen = {});
TuckerModel ho_svd(const Tensor& x, const Dims& core_dims, const EigenOptions& eigen = {});
RunResult ho_svd_run(const SparseTensor& x, const Dims& core_dims, const DecompOptions& options = {});

RunResult hooi(const SparseTensor& x, const Dims& core_dims, const ConvergenceConfig& cfg = {},
               const DecompOptions& options = {});
RunResult hooi(const Tensor& x, const Dims& core_dims, const ConvergenceConfig& cfg = {},
               const DecompOptions& options = {});

/// I x J matrix of independent uniform [0, 1) draws, columns scaled to unit length.
MatrixXd random_unit_columns(Index rows, Index cols, std::uint64_t seed);

/// Update order used by SP; validates a user permutation.
std::vector<std::size_t> sp_update_order(std::size_t order, const std::vector<std::size_t>& requested);

/// Fixed-mode sets each algorithm reads.
std::vector<std::vector<std::size_t>> sp_required_stores(std::size_t order, const std::vector<std::size_t>& sp_order = {});
std::vector<std::vector<std::size_t>> mp_required_stores(std::size_t order);

RunResult slice_projection(const SliceStoreSet& stores, const Dims& core_dims, const ConvergenceConfig& cfg = {},
                           const DecompOptions& options = {});
RunResult multislice_projection(const SliceStoreSet& stores, const Dims& core_dims,
                                const ConvergenceConfig& cfg = {}, const DecompOptions& options = {});

/// Adds Σ_s (S_s W)(S_s W)ᵀ, with S_s oriented so `target` indexes rows, to the
/// lower triangle of m. A null w means W = I.
void accumulate_slice_gram(const SliceStore& store, std::size_t target, const MatrixXd* w, MatrixXd& m);

/// Copies the lower triangle onto the upper one.
void symmetrize_from_lower(MatrixXd& m);

/// ⟦x; A⁽¹⁾ᵀ, …, A⁽ᴺ⁾ᵀ⟧ accumulated slice by slice.
Tensor core_from_slices(const SliceStore& store, std::span<const MatrixXd> factors);

/// 1 − ‖x − x̂‖ / ‖x‖ with one slice of x and of the residual in memory at a time.
double fit_from_slices(const SliceStore& store, const TuckerModel& model);

/// 1 − prev / curr.
double delta_core_growth(double prev_norm, double curr_norm);

}  // namespace tucker
