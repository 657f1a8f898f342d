#include "tucker/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace tucker {

namespace {

constexpr double symmetry_tolerance = 1e-10;
constexpr double tie_tolerance = 1e-12;

void check_symmetric(const MatrixXd& s) {
  if (s.rows() != s.cols())
    throw std::invalid_argument("leading_eigenvectors: matrix is " + std::to_string(s.rows()) + "x" +
                                std::to_string(s.cols()));
  if (!s.allFinite()) throw std::invalid_argument("leading_eigenvectors: non-finite entries");
  const double scale = s.cwiseAbs().maxCoeff();
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > symmetry_tolerance * scale)
    throw std::invalid_argument("leading_eigenvectors: matrix is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
}

// Gram-Schmidt of e_0, e_1, ... against the first `keep` columns of u,
// filling columns keep..k-1.
void complete_basis(MatrixXd& u, Index keep) {
  const Index n = u.rows();
  Index next = keep;
  for (Index e = 0; e < n && next < u.cols(); ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(n, e);
    // Two passes keep the completion orthogonal to working precision.
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j < next; ++j) v -= u.col(j).dot(v) * u.col(j);
    const double norm = v.norm();
    if (norm > 1e-8) u.col(next++) = v / norm;
  }
}

}  // namespace

void canonicalize_signs(MatrixXd& u) {
  for (Index j = 0; j < u.cols(); ++j) {
    const double peak = u.col(j).cwiseAbs().maxCoeff();
    Index pivot = 0;
    for (Index i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) >= peak * (1.0 - tie_tolerance)) {
        pivot = i;
        break;
      }
    }
    if (u(pivot, j) < 0) u.col(j) = -u.col(j);
  }
}

EigenPairs leading_eigenpairs(const MatrixXd& s, Index k, const EigenOptions& options) {
  check_symmetric(s);
  const Index n = s.rows();
  if (k < 1 || k > n)
    throw std::invalid_argument("leading_eigenvectors: k = " + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");

  MatrixXd work = options.square ? MatrixXd(s * s.transpose()) : s;
  // Exact symmetrization so the solver sees a bit-symmetric matrix.
  work = 0.5 * (work + work.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(work);
  if (solver.info() != Eigen::Success) throw std::runtime_error("leading_eigenvectors: eigensolver failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& all_values = solver.eigenvalues();
  const MatrixXd& all_vectors = solver.eigenvectors();
  const double scale = all_values.cwiseAbs().maxCoeff();
  const double zero_tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

  EigenPairs out;
  out.vectors = MatrixXd::Zero(n, k);
  out.values.resize(k);
  Index kept = 0;
  for (Index j = 0; j < k; ++j) {
    const Index src = n - 1 - j;
    if (scale > 0 && std::abs(all_values(src)) > zero_tol) {
      out.values(kept) = all_values(src);
      out.vectors.col(kept++) = all_vectors.col(src);
    }
  }
  // Numerically zero eigenvalues are dropped; their slots (moved to the end)
  // are filled by the completion below.
  for (Index j = kept; j < k; ++j) out.values(j) = 0.0;
  out.completed = k - kept;
  if (out.completed > 0) complete_basis(out.vectors, kept);
  canonicalize_signs(out.vectors);
  return out;
}

}  // namespace tucker
