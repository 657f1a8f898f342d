#pragma once

// Dense multilinear algebra on order-2..4 tensors.
//
// Layout: values are stored with the mode-0 index varying fastest, then
// mode 1, and so on. A tensor of dims (I0, ..., IN-1) holds element
// (i0, ..., iN-1) at  i0 + I0*(i1 + I1*(i2 + ...)).
//
// Matricization X_(n) is In x prod_{m != n} Im. Column j of X_(n) is the
// mode-n fiber whose fixed indices are linearized with the lower-numbered
// modes varying fastest, so X_(0) = [x_:00 x_:10 ... ] for an order-3 tensor.
//
// Modes are 0-based throughout the C++ API.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tucker/memory.hpp"

namespace tucker {

using Index = Eigen::Index;
using Dims = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using MatrixXd = Matrix<double>;

inline constexpr std::size_t min_order = 2;
inline constexpr std::size_t max_order = 4;

inline Index product(std::span<const Index> dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>{});
}

inline std::string to_string(std::span<const Index> dims) {
  std::string s;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (n) s += 'x';
    s += std::to_string(dims[n]);
  }
  return s;
}

inline void check_dims(std::span<const Index> dims) {
  if (dims.size() < min_order || dims.size() > max_order)
    throw std::invalid_argument("tensor order must be between 2 and 4, got " +
                                std::to_string(dims.size()));
  for (Index d : dims)
    if (d < 1) throw std::invalid_argument("tensor dimensions must be positive: " + to_string(dims));
}

template <typename Scalar>
class DenseTensor {
 public:
  using Storage = memory::tracked_vector<Scalar>;
  using VectorMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  using ConstVectorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

  DenseTensor() = default;

  explicit DenseTensor(Dims dims) : dims_(std::move(dims)) {
    check_dims(dims_);
    values_.assign(static_cast<std::size_t>(product(dims_)), Scalar(0));
  }

  DenseTensor(Dims dims, std::span<const Scalar> values) : dims_(std::move(dims)) {
    check_dims(dims_);
    if (static_cast<Index>(values.size()) != product(dims_))
      throw std::invalid_argument("value count does not match dims " + to_string(dims_));
    values_.assign(values.begin(), values.end());
  }

  DenseTensor(Dims dims, std::initializer_list<Scalar> values)
      : DenseTensor(std::move(dims), std::span<const Scalar>(values.begin(), values.size())) {}

  static DenseTensor Zero(Dims dims) { return DenseTensor(std::move(dims)); }

  static DenseTensor Constant(Dims dims, Scalar value) {
    DenseTensor t(std::move(dims));
    std::fill(t.values_.begin(), t.values_.end(), value);
    return t;
  }

  std::size_t order() const { return dims_.size(); }
  const Dims& dims() const { return dims_; }
  Index dim(std::size_t mode) const { return dims_.at(mode); }
  Index size() const { return static_cast<Index>(values_.size()); }

  std::span<Scalar> values() { return values_; }
  std::span<const Scalar> values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  VectorMap vector() { return VectorMap(values_.data(), size()); }
  ConstVectorMap vector() const { return ConstVectorMap(values_.data(), size()); }

  Index linear_index(std::span<const Index> idx) const {
    Index lin = 0;
    for (std::size_t n = dims_.size(); n-- > 0;) lin = lin * dims_[n] + idx[n];
    return lin;
  }

  Scalar& operator()(std::initializer_list<Index> idx) {
    return values_[static_cast<std::size_t>(linear_index({idx.begin(), idx.size()}))];
  }
  Scalar operator()(std::initializer_list<Index> idx) const {
    return values_[static_cast<std::size_t>(linear_index({idx.begin(), idx.size()}))];
  }
  Scalar& at(std::span<const Index> idx) { return values_[static_cast<std::size_t>(linear_index(idx))]; }
  Scalar at(std::span<const Index> idx) const { return values_[static_cast<std::size_t>(linear_index(idx))]; }

  bool operator==(const DenseTensor& other) const {
    return dims_ == other.dims_ && std::equal(values_.begin(), values_.end(), other.values_.begin());
  }

 private:
  Dims dims_;
  Storage values_;
};

using Tensor = DenseTensor<double>;

namespace detail {

inline void check_mode(std::size_t order, std::size_t mode) {
  if (mode >= order)
    throw std::invalid_argument("mode " + std::to_string(mode) + " out of range for order " +
                                std::to_string(order));
}

// Strides of the (left, mode, right) view of a tensor around `mode`.
inline std::pair<Index, Index> outer_extents(const Dims& dims, std::size_t mode) {
  Index left = 1, right = 1;
  for (std::size_t m = 0; m < mode; ++m) left *= dims[m];
  for (std::size_t m = mode + 1; m < dims.size(); ++m) right *= dims[m];
  return {left, right};
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> matricize(const DenseTensor<Scalar>& x, std::size_t mode) {
  detail::check_mode(x.order(), mode);
  const auto [left, right] = detail::outer_extents(x.dims(), mode);
  const Index rows = x.dim(mode);
  Matrix<Scalar> m(rows, left * right);
  const Scalar* src = x.data();
  for (Index r = 0; r < right; ++r)
    for (Index i = 0; i < rows; ++i)
      for (Index l = 0; l < left; ++l) m(i, l + left * r) = src[l + left * (i + rows * r)];
  return m;
}

template <typename Derived>
DenseTensor<typename Derived::Scalar> fold(const Eigen::MatrixBase<Derived>& m, std::size_t mode,
                                           const Dims& dims) {
  using Scalar = typename Derived::Scalar;
  check_dims(dims);
  detail::check_mode(dims.size(), mode);
  const auto [left, right] = detail::outer_extents(dims, mode);
  const Index rows = dims[mode];
  if (m.rows() != rows || m.cols() != left * right)
    throw std::invalid_argument("fold: matrix of shape " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + " does not match dims " + to_string(dims) +
                                " in mode " + std::to_string(mode));
  DenseTensor<Scalar> x(dims);
  Scalar* dst = x.data();
  for (Index r = 0; r < right; ++r)
    for (Index i = 0; i < rows; ++i)
      for (Index l = 0; l < left; ++l) dst[l + left * (i + rows * r)] = m(i, l + left * r);
  return x;
}

/// y = x  x_mode  a, i.e. every mode-`mode` fiber of x is multiplied by a.
template <typename Scalar, typename Derived>
DenseTensor<Scalar> n_mode_product(const DenseTensor<Scalar>& x, const Eigen::MatrixBase<Derived>& a,
                                   std::size_t mode) {
  detail::check_mode(x.order(), mode);
  if (a.cols() != x.dim(mode))
    throw std::invalid_argument("n_mode_product: matrix has " + std::to_string(a.cols()) +
                                " columns but mode " + std::to_string(mode) + " has extent " +
                                std::to_string(x.dim(mode)));
  Dims out_dims = x.dims();
  out_dims[mode] = a.rows();
  DenseTensor<Scalar> y(out_dims);
  const auto [left, right] = detail::outer_extents(x.dims(), mode);
  const Index in_rows = x.dim(mode);
  const Index out_rows = a.rows();
  using MatMap = Eigen::Map<Matrix<Scalar>>;
  using ConstMatMap = Eigen::Map<const Matrix<Scalar>>;
  const Matrix<Scalar> a_eval = a;
  if (left == 1) {
    ConstMatMap xm(x.data(), in_rows, right);
    MatMap ym(y.data(), out_rows, right);
    ym.noalias() = a_eval * xm;
  } else {
    for (Index r = 0; r < right; ++r) {
      ConstMatMap xs(x.data() + left * in_rows * r, left, in_rows);
      MatMap ys(y.data() + left * out_rows * r, left, out_rows);
      ys.noalias() = xs * a_eval.transpose();
    }
  }
  return y;
}

/// [[g; a0, ..., aN-1]] = g x_0 a0 x_1 a1 ... x_N-1 aN-1.
template <typename Scalar>
DenseTensor<Scalar> tucker_apply(const DenseTensor<Scalar>& g, std::span<const Matrix<Scalar>> factors) {
  if (factors.size() != g.order())
    throw std::invalid_argument("tucker_apply: " + std::to_string(factors.size()) + " factors for order " +
                                std::to_string(g.order()));
  DenseTensor<Scalar> y = g;
  for (std::size_t n = 0; n < factors.size(); ++n) y = n_mode_product(y, factors[n], n);
  return y;
}

template <typename Scalar>
DenseTensor<Scalar> tucker_apply(const DenseTensor<Scalar>& g, const std::vector<Matrix<Scalar>>& factors) {
  return tucker_apply(g, std::span<const Matrix<Scalar>>(factors));
}

template <typename Scalar>
std::vector<Matrix<Scalar>> transposed(std::span<const Matrix<Scalar>> factors) {
  std::vector<Matrix<Scalar>> t;
  t.reserve(factors.size());
  for (const auto& f : factors) t.push_back(f.transpose());
  return t;
}

template <typename Scalar>
std::vector<Matrix<Scalar>> transposed(const std::vector<Matrix<Scalar>>& factors) {
  return transposed(std::span<const Matrix<Scalar>>(factors));
}

template <typename Scalar>
Scalar squared_norm(const DenseTensor<Scalar>& x) {
  return x.vector().squaredNorm();
}

template <typename Scalar>
Scalar frobenius_norm(const DenseTensor<Scalar>& x) {
  return x.vector().norm();
}

/// 1 - ||x - xhat||_F / ||x||_F.
template <typename Scalar>
Scalar fit(const DenseTensor<Scalar>& x, const DenseTensor<Scalar>& xhat) {
  if (x.dims() != xhat.dims())
    throw std::invalid_argument("fit: dims " + to_string(x.dims()) + " vs " + to_string(xhat.dims()));
  const Scalar norm_x = frobenius_norm(x);
  if (norm_x == Scalar(0)) throw std::domain_error("fit: reference tensor has zero norm");
  return Scalar(1) - (x.vector() - xhat.vector()).norm() / norm_x;
}

}  // namespace tucker
