#pragma once

// In-memory SP and MP built from dense slices of a dense tensor. Nothing is
// read from disk; the only library routine used is the eigensolver, so Gram
// sums, cores and fits are computed independently of the slice stores.

#include <optional>
#include <vector>

#include "oracles.hpp"
#include "tucker/linalg.hpp"

namespace oracle {

struct GramRecord {
  std::size_t iteration;
  std::size_t mode;
  MatrixXd gram;
};

struct SweepRecord {
  Tensor core;
  double measure;
  double fit;
};

struct Trace {
  std::vector<GramRecord> grams;
  std::vector<SweepRecord> sweeps;
  std::vector<MatrixXd> factors;
};

inline MatrixXd unit_columns(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatrixXd a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = std::ldexp(static_cast<double>(rng() >> 11), -53);
  for (Index j = 0; j < cols; ++j) a.col(j) /= a.col(j).norm();
  return a;
}

// Σ over slices keeping modes {n, o} of (S W)(S W)ᵀ, S oriented with n on rows.
inline MatrixXd gram_term(const Tensor& x, std::size_t n, std::size_t o, const MatrixXd* w) {
  std::vector<std::size_t> fixed;
  for (std::size_t m = 0; m < x.order(); ++m)
    if (m != n && m != o) fixed.push_back(m);
  MatrixXd sum = MatrixXd::Zero(x.dim(n), x.dim(n));
  for (const MatrixXd& s : slices(x, fixed)) {
    const MatrixXd oriented = n < o ? s : MatrixXd(s.transpose());
    const MatrixXd p = w ? MatrixXd(oriented * *w) : oriented;
    sum += p * p.transpose();
  }
  return sum;
}

inline MatrixXd top(const MatrixXd& m, Index k) { return tucker::leading_eigenvectors(m, k); }

inline SweepRecord close_sweep(const Tensor& x, const std::vector<MatrixXd>& f, double prev, bool growth) {
  SweepRecord r;
  r.core = tucker(x, transpose_all(f));
  r.fit = fit(x, tucker(r.core, f));
  r.measure = growth ? 1.0 - prev / norm(r.core) : r.fit;
  return r;
}

inline Trace sp(const Tensor& x, const Dims& core, std::vector<std::size_t> order, std::uint64_t seed,
                double tol = 1e-4, std::size_t max_iters = 50) {
  const std::size_t N = x.order();
  if (order.empty())
    for (std::size_t n = 0; n < N; ++n) order.push_back(n);
  Trace t;
  t.factors.resize(N);
  const std::size_t last = order[N - 1];
  t.factors[last] = unit_columns(x.dim(last), core[last], seed);
  double prev = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    for (std::size_t k = 0; k < N; ++k) {
      const std::size_t n = order[k], o = order[(k + N - 1) % N];
      MatrixXd m = gram_term(x, n, o, &t.factors[o]);
      t.factors[n] = top(m, core[n]);
      t.grams.push_back({it, n, std::move(m)});
    }
    t.sweeps.push_back(close_sweep(x, t.factors, prev, true));
    if (t.sweeps.back().measure < tol) break;
    prev = norm(t.sweeps.back().core);
  }
  return t;
}

inline Trace mp(const Tensor& x, const Dims& core, double tol = 1e-4, std::size_t max_iters = 50) {
  const std::size_t N = x.order();
  Trace t;
  t.factors.resize(N);
  auto update = [&](std::size_t n, std::size_t it, bool plain) {
    MatrixXd m = MatrixXd::Zero(x.dim(n), x.dim(n));
    for (std::size_t o = 0; o < N; ++o)
      if (o != n) m += gram_term(x, n, o, plain ? nullptr : &t.factors[o]);
    t.factors[n] = top(m, core[n]);
    t.grams.push_back({it, n, std::move(m)});
  };
  for (std::size_t n = 1; n < N; ++n) update(n, 0, true);
  double prev = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    for (std::size_t n = 0; n < N; ++n) update(n, it, false);
    t.sweeps.push_back(close_sweep(x, t.factors, prev, false));
    if (t.sweeps.back().measure - prev < tol) break;
    prev = t.sweeps.back().measure;
  }
  return t;
}

}  // namespace oracle
