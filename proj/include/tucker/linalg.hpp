#pragma once

#include <Eigen/Dense>

#include "tucker/tensor.hpp"

namespace tucker {

struct EigenOptions {
  /// Decompose s * s^T instead of s. Same eigenvectors for symmetric PSD s;
  /// kept for comparison runs against the squared formulation.
  bool square = false;
};

struct EigenPairs {
  MatrixXd vectors;        // n x k, orthonormal, sign-canonical
  Eigen::VectorXd values;  // k, descending
  Index completed = 0;     // columns filled by orthonormal completion
};

/// Leading k eigenpairs of a symmetric matrix, ordered by eigenvalue
/// descending. Each column is sign-canonicalized so its largest-magnitude
/// entry is positive (lowest index wins ties). Columns whose eigenvalue is
/// numerically zero are replaced by Gram-Schmidt completion against the
/// standard basis, lowest index first.
EigenPairs leading_eigenpairs(const MatrixXd& s, Index k, const EigenOptions& options = {});

inline MatrixXd leading_eigenvectors(const MatrixXd& s, Index k, const EigenOptions& options = {}) {
  return leading_eigenpairs(s, k, options).vectors;
}

/// Flips column signs in place so the largest-magnitude entry of each column
/// is positive.
void canonicalize_signs(MatrixXd& u);

}  // namespace tucker
