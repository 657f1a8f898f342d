#include "tucker/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <string>

namespace tucker {

namespace {

std::vector<Index> strides_of(const Dims& dims) {
  std::vector<Index> s(dims.size(), 1);
  for (std::size_t n = 1; n < dims.size(); ++n) s[n] = s[n - 1] * dims[n - 1];
  return s;
}

void require_nonzero(const SparseTensor& x) {
  if (x.nnz() == 0) throw std::domain_error("cannot decompose an all-zero tensor");
}

struct EigenStep {
  bool completed = false;
  MatrixXd vectors;
};

EigenStep factor_from_gram(const MatrixXd& m, Index k, const EigenOptions& eigen) {
  memory::Reservation workspace(static_cast<std::size_t>(m.size()) * sizeof(double));
  auto pairs = leading_eigenpairs(m, k, eigen);
  return {pairs.completed > 0, std::move(pairs.vectors)};
}

void notify_gram(const DecompOptions& o, std::size_t iteration, std::size_t mode, const MatrixXd& m,
                 const MatrixXd& a) {
  if (o.observer && o.observer->on_gram) o.observer->on_gram(GramEvent{iteration, mode, m, a});
}

void notify_sweep(const DecompOptions& o, std::size_t iteration, const TuckerModel& model, double measure,
                  std::optional<double> fit) {
  if (o.observer && o.observer->on_sweep) o.observer->on_sweep(SweepEvent{iteration, model, measure, fit});
}

// Gram of Z_(n) for a dense intermediate.
MatrixXd unfolding_gram(const Tensor& z, std::size_t mode) {
  const Index n = z.dim(mode);
  memory::Reservation unfolded(static_cast<std::size_t>(z.size()) * sizeof(double));
  const MatrixXd zn = matricize(z, mode);
  memory::Reservation gram(static_cast<std::size_t>(n * n) * sizeof(double));
  MatrixXd m = MatrixXd::Zero(n, n);
  m.selfadjointView<Eigen::Lower>().rankUpdate(zn);
  symmetrize_from_lower(m);
  return m;
}

void check_store_dims(const SliceLayout& l, std::span<const MatrixXd> factors) {
  if (factors.size() != l.dims.size()) throw std::invalid_argument("one factor per mode is required");
  for (std::size_t n = 0; n < factors.size(); ++n)
    if (factors[n].rows() != l.dims[n])
      throw std::invalid_argument("factor " + std::to_string(n + 1) + " has " + std::to_string(factors[n].rows()) +
                                  " rows for a mode of size " + std::to_string(l.dims[n]));
}

// Combinations of core indices over the fixed modes of a slice, with the
// product of the matching factor entries and the core offset they select.
template <typename Fn>
void for_each_fixed_combo(const SliceLayout& l, std::span<const Index> fixed_idx, std::span<const MatrixXd> factors,
                          const std::vector<Index>& core_strides, Fn&& fn) {
  const std::size_t f0 = l.fixed[0];
  const Index j0 = factors[f0].cols();
  if (l.fixed.size() == 1) {
    for (Index a = 0; a < j0; ++a) fn(factors[f0](fixed_idx[0], a), a * core_strides[f0]);
    return;
  }
  const std::size_t f1 = l.fixed[1];
  const Index j1 = factors[f1].cols();
  for (Index b = 0; b < j1; ++b)
    for (Index a = 0; a < j0; ++a)
      fn(factors[f0](fixed_idx[0], a) * factors[f1](fixed_idx[1], b), a * core_strides[f0] + b * core_strides[f1]);
}

}  // namespace

void ConvergenceConfig::validate() const {
  if (!(fit_threshold > 0) || !std::isfinite(fit_threshold))
    throw std::invalid_argument("fit threshold must be positive");
  if (!(core_growth_threshold > 0) || !std::isfinite(core_growth_threshold))
    throw std::invalid_argument("core growth threshold must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max iterations must be at least 1");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::threshold: return "threshold";
    case Termination::max_iterations: return "max_iterations";
    case Termination::single_pass: return "single_pass";
  }
  return "unknown";
}

bool RunResult::operator==(const RunResult& o) const {
  auto same_bits = [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; };
  if (!(model == o.model) || iterations != o.iterations || terminated_by != o.terminated_by ||
      !same_bits(fit, o.fit) || rank_deficient != o.rank_deficient || has_empty_slices != o.has_empty_slices ||
      fit_history.size() != o.fit_history.size())
    return false;
  for (std::size_t i = 0; i < fit_history.size(); ++i)
    if (!same_bits(fit_history[i], o.fit_history[i])) return false;
  return true;
}

void check_core_dims(const Dims& dims, const Dims& core_dims) {
  check_dims(dims);
  if (dims.size() < min_order || dims.size() > max_order)
    throw std::invalid_argument("order " + std::to_string(dims.size()) + " is not supported (2 to 4)");
  if (core_dims.size() != dims.size())
    throw std::invalid_argument("core dims " + to_string(core_dims) + " do not match order of " + to_string(dims));
  for (std::size_t n = 0; n < dims.size(); ++n)
    if (core_dims[n] < 1 || core_dims[n] > dims[n])
      throw std::invalid_argument("core dimension " + std::to_string(core_dims[n]) + " in mode " +
                                  std::to_string(n + 1) + " outside [1, " + std::to_string(dims[n]) + "]");
}

MatrixXd mode_gram(const SparseTensor& x, std::size_t mode) {
  detail::check_mode(x.order(), mode);
  const Index in = x.dim(mode);
  const std::size_t nnz = x.nnz();
  // Column of X_(n) for every nonzero; entries sharing a column pair up.
  memory::tracked_vector<std::uint64_t> column(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    std::uint64_t key = 0;
    for (std::size_t m = x.order(); m-- > 0;)
      if (m != mode) key = key * static_cast<std::uint64_t>(x.dim(m)) + static_cast<std::uint64_t>(x.index(k, m));
    column[k] = key;
  }
  memory::tracked_vector<std::size_t> perm(nnz);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });

  memory::Reservation gram(static_cast<std::size_t>(in * in) * sizeof(double));
  MatrixXd m = MatrixXd::Zero(in, in);
  for (std::size_t b = 0; b < nnz;) {
    std::size_t e = b + 1;
    while (e < nnz && column[perm[e]] == column[perm[b]]) ++e;
    for (std::size_t p = b; p < e; ++p) {
      const Index ip = x.index(perm[p], mode);
      const double vp = x.value(perm[p]);
      for (std::size_t q = b; q <= p; ++q) {
        const Index iq = x.index(perm[q], mode);
        m(std::max(ip, iq), std::min(ip, iq)) += vp * x.value(perm[q]);
      }
    }
    b = e;
  }
  symmetrize_from_lower(m);
  return m;
}

Tensor sparse_mode_product_t(const SparseTensor& x, const MatrixXd& a, std::size_t mode) {
  detail::check_mode(x.order(), mode);
  if (a.rows() != x.dim(mode))
    throw std::invalid_argument("factor has " + std::to_string(a.rows()) + " rows, mode " + std::to_string(mode + 1) +
                                " has size " + std::to_string(x.dim(mode)));
  Dims out = x.dims();
  out[mode] = a.cols();
  Tensor t(out);
  const auto s = strides_of(out);
  double* data = t.data();
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    Index base = 0;
    for (std::size_t m = 0; m < x.order(); ++m)
      if (m != mode) base += x.index(k, m) * s[m];
    const Index i = x.index(k, mode);
    const double v = x.value(k);
    for (Index j = 0; j < a.cols(); ++j) data[base + j * s[mode]] += v * a(i, j);
  }
  return t;
}

Tensor project(const SparseTensor& x, std::span<const MatrixXd> factors, std::size_t skip) {
  if (factors.size() != x.order()) throw std::invalid_argument("one factor per mode is required");
  std::vector<std::size_t> modes;
  for (std::size_t m = 0; m < x.order(); ++m)
    if (m != skip) modes.push_back(m);
  Tensor t = sparse_mode_product_t(x, factors[modes[0]], modes[0]);
  for (std::size_t k = 1; k < modes.size(); ++k) t = n_mode_product(t, factors[modes[k]].transpose(), modes[k]);
  return t;
}

double sparse_fit(const SparseTensor& x, const TuckerModel& model, HooiFitMethod method) {
  model.validate();
  if (model.dims() != x.dims()) throw std::invalid_argument("model dims do not match the tensor");
  const double norm_x = x.squared_norm();
  if (norm_x == 0.0) throw std::domain_error("fit is undefined for an all-zero tensor");
  const std::size_t order = x.order();
  const auto& g = model.core;
  const auto& a = model.factors;
  double sqerr = 0.0;

  if (method == HooiFitMethod::norm_identity) {
    double inner = 0.0;
    Eigen::VectorXd v;
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      // Contract the core against one row per mode, last mode first.
      v = g.vector();
      Index rows = g.size();
      for (std::size_t n = order; n-- > 0;) {
        rows /= g.dim(n);
        Eigen::Map<const MatrixXd> gm(v.data(), rows, g.dim(n));
        Eigen::VectorXd next = gm * a[n].row(x.index(k, n)).transpose();
        v.swap(next);
      }
      inner += x.value(k) * v(0);
    }
    sqerr = std::max(0.0, norm_x - 2.0 * inner + squared_norm(g));
    return 1.0 - std::sqrt(sqerr) / std::sqrt(norm_x);
  }

  Dims ydims = x.dims();
  ydims[0] = 1;
  const auto ys = strides_of(ydims);
  for (Index i = 0; i < x.dim(0); ++i) {
    Tensor y = n_mode_product(g, a[0].row(i), 0);
    for (std::size_t n = 1; n < order; ++n) y = n_mode_product(y, a[n], n);
    auto [b, e] = x.mode0_slice(i);
    double* yd = y.data();
    for (std::size_t k = b; k < e; ++k) {
      Index lin = 0;
      for (std::size_t n = 1; n < order; ++n) lin += x.index(k, n) * ys[n];
      yd[lin] -= x.value(k);
    }
    sqerr += squared_norm(y);
  }
  return 1.0 - std::sqrt(sqerr) / std::sqrt(norm_x);
}

TuckerModel ho_svd(const SparseTensor& x, const Dims& core_dims, const EigenOptions& eigen) {
  DecompOptions o;
  o.eigen = eigen;
  return ho_svd_run(x, core_dims, o).model;
}

TuckerModel ho_svd(const Tensor& x, const Dims& core_dims, const EigenOptions& eigen) {
  return ho_svd(SparseTensor::from_dense(x), core_dims, eigen);
}

RunResult ho_svd_run(const SparseTensor& x, const Dims& core_dims, const DecompOptions& options) {
  check_core_dims(x.dims(), core_dims);
  require_nonzero(x);
  RunResult r;
  std::vector<MatrixXd> factors(x.order());
  for (std::size_t n = 0; n < x.order(); ++n) {
    const MatrixXd m = mode_gram(x, n);
    auto step = factor_from_gram(m, core_dims[n], options.eigen);
    r.rank_deficient |= step.completed;
    factors[n] = std::move(step.vectors);
    notify_gram(options, 0, n, m, factors[n]);
  }
  Tensor core = project(x, factors, x.order());
  r.model = TuckerModel{std::move(core), std::move(factors)};
  r.fit = sparse_fit(x, r.model);
  r.fit_history = {r.fit};
  r.iterations = 1;
  r.terminated_by = Termination::single_pass;
  notify_sweep(options, 1, r.model, r.fit, r.fit);
  return r;
}

RunResult hooi(const SparseTensor& x, const Dims& core_dims, const ConvergenceConfig& cfg,
               const DecompOptions& options) {
  cfg.validate();
  check_core_dims(x.dims(), core_dims);
  require_nonzero(x);
  const std::size_t order = x.order();
  RunResult r;
  std::vector<MatrixXd> factors(order);
  factors[0] = MatrixXd::Zero(x.dim(0), core_dims[0]);  // overwritten before first use
  for (std::size_t n = 1; n < order; ++n) {
    const MatrixXd m = mode_gram(x, n);
    auto step = factor_from_gram(m, core_dims[n], options.eigen);
    r.rank_deficient |= step.completed;
    factors[n] = std::move(step.vectors);
    notify_gram(options, 0, n, m, factors[n]);
  }

  double prev_fit = 0.0;
  r.terminated_by = Termination::max_iterations;
  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    Tensor core;
    for (std::size_t n = 0; n < order; ++n) {
      Tensor z = project(x, factors, n);
      const MatrixXd m = unfolding_gram(z, n);
      auto step = factor_from_gram(m, core_dims[n], options.eigen);
      r.rank_deficient |= step.completed;
      factors[n] = std::move(step.vectors);
      notify_gram(options, t, n, m, factors[n]);
      if (n + 1 == order) core = n_mode_product(z, factors[n].transpose(), n);
    }
    r.model = TuckerModel{std::move(core), factors};
    const double fit = sparse_fit(x, r.model, options.hooi_fit);
    r.fit_history.push_back(fit);
    r.iterations = t;
    r.fit = fit;
    notify_sweep(options, t, r.model, fit, fit);
    if (fit - prev_fit < cfg.fit_threshold) {
      r.terminated_by = Termination::threshold;
      break;
    }
    prev_fit = fit;
  }
  return r;
}

RunResult hooi(const Tensor& x, const Dims& core_dims, const ConvergenceConfig& cfg, const DecompOptions& options) {
  return hooi(SparseTensor::from_dense(x), core_dims, cfg, options);
}

MatrixXd random_unit_columns(Index rows, Index cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("random_unit_columns: dims must be positive");
  std::mt19937_64 rng(seed);
  MatrixXd a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  for (Index j = 0; j < cols; ++j) {
    const double nrm = a.col(j).norm();
    if (nrm == 0.0) throw std::runtime_error("random_unit_columns: drew a zero column");
    a.col(j) /= nrm;
  }
  return a;
}

std::vector<std::size_t> sp_update_order(std::size_t order, const std::vector<std::size_t>& requested) {
  std::vector<std::size_t> p(order);
  std::iota(p.begin(), p.end(), std::size_t{0});
  if (requested.empty()) return p;
  auto sorted = requested;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != p) throw std::invalid_argument("SP update order must be a permutation of the modes");
  return requested;
}

std::vector<std::vector<std::size_t>> sp_required_stores(std::size_t order, const std::vector<std::size_t>& sp_order) {
  const auto p = sp_update_order(order, sp_order);
  std::set<std::vector<std::size_t>> sets;
  for (std::size_t k = 0; k < order; ++k) sets.insert(fixed_modes_leaving(order, p[k], p[(k + order - 1) % order]));
  return {sets.begin(), sets.end()};
}

std::vector<std::vector<std::size_t>> mp_required_stores(std::size_t order) { return all_fixed_mode_sets(order); }

void symmetrize_from_lower(MatrixXd& m) { m.triangularView<Eigen::StrictlyUpper>() = m.transpose(); }

void accumulate_slice_gram(const SliceStore& store, std::size_t target, const MatrixXd* w, MatrixXd& m) {
  const auto& l = store.layout();
  if (target != l.row_mode && target != l.col_mode)
    throw std::invalid_argument("store fixing the requested mode cannot serve this Gram sum");
  const bool as_rows = target == l.row_mode;
  const std::size_t other = as_rows ? l.col_mode : l.row_mode;
  const Index n = l.dims[target];
  if (m.rows() != n || m.cols() != n) throw std::invalid_argument("Gram accumulator has the wrong size");
  if (w && w->rows() != l.dims[other]) throw std::invalid_argument("projection factor has the wrong row count");

  store.for_each([&](Index, const SliceMatrix& s) {
    if (s.nnz() == 0) return;
    if (w) {
      memory::Reservation held(static_cast<std::size_t>(n * w->cols()) * sizeof(double));
      const MatrixXd p = as_rows ? MatrixXd(s.view() * *w) : MatrixXd(s.view().transpose() * *w);
      m.selfadjointView<Eigen::Lower>().rankUpdate(p);
      return;
    }
    const auto off = s.row_offsets();
    const auto col = s.column_indices();
    const auto val = s.values();
    if (!as_rows) {
      // SᵀS: pairs of entries within each row.
      for (Index r = 0; r < s.rows(); ++r)
        for (auto p = off[r]; p < off[r + 1]; ++p)
          for (auto q = off[r]; q <= p; ++q) m(col[p], col[q]) += val[p] * val[q];
      return;
    }
    // S Sᵀ: pairs of entries within each column, via a column-major copy.
    memory::tracked_vector<std::int64_t> coff(static_cast<std::size_t>(s.cols()) + 1, 0);
    memory::tracked_vector<std::int64_t> crow(static_cast<std::size_t>(s.nnz()));
    memory::tracked_vector<double> cval(static_cast<std::size_t>(s.nnz()));
    for (auto c : col) ++coff[static_cast<std::size_t>(c) + 1];
    std::partial_sum(coff.begin(), coff.end(), coff.begin());
    memory::tracked_vector<std::int64_t> fill(coff.begin(), coff.end() - 1);
    for (Index r = 0; r < s.rows(); ++r)
      for (auto p = off[r]; p < off[r + 1]; ++p) {
        const auto dst = fill[static_cast<std::size_t>(col[p])]++;
        crow[dst] = r;
        cval[dst] = val[p];
      }
    for (Index c = 0; c < s.cols(); ++c)
      for (auto p = coff[c]; p < coff[c + 1]; ++p)
        for (auto q = coff[c]; q <= p; ++q) m(crow[p], crow[q]) += cval[p] * cval[q];
  });
}

Tensor core_from_slices(const SliceStore& store, std::span<const MatrixXd> factors) {
  const auto& l = store.layout();
  check_store_dims(l, factors);
  Dims jd;
  for (const auto& a : factors) jd.push_back(a.cols());
  Tensor g(jd);
  const auto gs = strides_of(jd);
  const auto& ar = factors[l.row_mode];
  const auto& ac = factors[l.col_mode];
  const Index sr = gs[l.row_mode], sc = gs[l.col_mode];
  double* gd = g.data();
  store.for_each([&](Index s, const SliceMatrix& x) {
    if (x.nnz() == 0) return;
    memory::Reservation held(static_cast<std::size_t>(x.rows() * ac.cols() + ar.cols() * ac.cols()) * sizeof(double));
    const MatrixXd p = ar.transpose() * (x.view() * ac);
    const auto idx = l.fixed_indices(s);
    for_each_fixed_combo(l, idx, factors, gs, [&](double coef, Index base) {
      for (Index c = 0; c < p.cols(); ++c)
        for (Index r = 0; r < p.rows(); ++r) gd[base + r * sr + c * sc] += coef * p(r, c);
    });
  });
  return g;
}

double fit_from_slices(const SliceStore& store, const TuckerModel& model) {
  model.validate();
  const auto& l = store.layout();
  check_store_dims(l, model.factors);
  const auto& g = model.core;
  const auto gs = strides_of(g.dims());
  const auto& ar = model.factors[l.row_mode];
  const auto& ac = model.factors[l.col_mode];
  const Index sr = gs[l.row_mode], sc = gs[l.col_mode];
  const double* gd = g.data();

  double norm_x = 0.0;
  double sqerr = 0.0;
  memory::Reservation held(static_cast<std::size_t>(ar.cols() * (ac.cols() + ac.rows()) + ac.rows()) *
                           sizeof(double));
  MatrixXd h(ar.cols(), ac.cols());
  Eigen::RowVectorXd y(ac.rows());
  store.for_each([&](Index s, const SliceMatrix& x) {
    h.setZero();
    const auto idx = l.fixed_indices(s);
    for_each_fixed_combo(l, idx, model.factors, gs, [&](double coef, Index base) {
      for (Index c = 0; c < h.cols(); ++c)
        for (Index r = 0; r < h.rows(); ++r) h(r, c) += coef * gd[base + r * sr + c * sc];
    });
    const MatrixXd t = h * ac.transpose();  // J_r x I_c
    const auto off = x.row_offsets();
    const auto col = x.column_indices();
    const auto val = x.values();
    for (Index r = 0; r < x.rows(); ++r) {
      y.noalias() = ar.row(r) * t;
      for (auto p = off[r]; p < off[r + 1]; ++p) y(col[p]) -= val[p];
      sqerr += y.squaredNorm();
    }
    norm_x += x.squared_norm();
  });
  if (norm_x == 0.0) throw std::domain_error("fit is undefined for an all-zero tensor");
  return 1.0 - std::sqrt(sqerr) / std::sqrt(norm_x);
}

double delta_core_growth(double prev_norm, double curr_norm) {
  if (!(curr_norm > 0.0) || !std::isfinite(curr_norm))
    throw std::domain_error("core growth is undefined for a zero core");
  return 1.0 - prev_norm / curr_norm;
}

namespace {

void check_store_set(const SliceStoreSet& stores, const Dims& core_dims) {
  if (stores.size() == 0) throw std::invalid_argument("no slice stores supplied");
  const auto& dims = stores.dims();
  if (dims.size() != 3 && dims.size() != 4)
    throw std::invalid_argument("slice-based methods need a 3rd- or 4th-order tensor");
  check_core_dims(dims, core_dims);
}

void require_store(const SliceStoreSet& stores, std::size_t a, std::size_t b) {
  if (!stores.has_remaining(a, b)) {
    const auto f = fixed_modes_leaving(stores.dims().size(), a, b);
    throw std::invalid_argument("missing slice store " + store_directory_name(f));
  }
}

const SliceStore& model_store(const SliceStoreSet& stores) { return stores.begin()->second; }

}  // namespace

RunResult slice_projection(const SliceStoreSet& stores, const Dims& core_dims, const ConvergenceConfig& cfg,
                           const DecompOptions& options) {
  cfg.validate();
  check_store_set(stores, core_dims);
  const auto& dims = stores.dims();
  const std::size_t order = dims.size();
  const auto pi = sp_update_order(order, options.sp_order);
  auto prev_of = [&](std::size_t k) { return pi[(k + order - 1) % order]; };
  for (std::size_t k = 0; k < order; ++k) require_store(stores, pi[k], prev_of(k));

  RunResult r;
  r.has_empty_slices = stores.any_empty_slices();
  std::vector<MatrixXd> factors(order);
  for (std::size_t n = 0; n < order; ++n) factors[n] = MatrixXd::Zero(dims[n], core_dims[n]);
  factors[pi[order - 1]] = random_unit_columns(dims[pi[order - 1]], core_dims[pi[order - 1]], options.seed);

  const SliceStore& core_store = model_store(stores);
  double prev_norm = 0.0;
  r.terminated_by = Termination::max_iterations;
  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    for (std::size_t k = 0; k < order; ++k) {
      const std::size_t n = pi[k], o = prev_of(k);
      memory::Reservation gram(static_cast<std::size_t>(dims[n] * dims[n]) * sizeof(double));
      MatrixXd m = MatrixXd::Zero(dims[n], dims[n]);
      accumulate_slice_gram(stores.for_remaining(n, o), n, &factors[o], m);
      symmetrize_from_lower(m);
      auto step = factor_from_gram(m, core_dims[n], options.eigen);
      r.rank_deficient |= step.completed;
      factors[n] = std::move(step.vectors);
      notify_gram(options, t, n, m, factors[n]);
    }
    r.model = TuckerModel{core_from_slices(core_store, factors), factors};
    const double norm = frobenius_norm(r.model.core);
    const double delta = delta_core_growth(prev_norm, norm);
    r.fit_history.push_back(delta);
    r.iterations = t;
    std::optional<double> fit;
    if (options.sp_track_fit) fit = fit_from_slices(core_store, r.model);
    notify_sweep(options, t, r.model, delta, fit);
    if (delta < cfg.core_growth_threshold) {
      r.terminated_by = Termination::threshold;
      break;
    }
    prev_norm = norm;
  }
  r.fit = fit_from_slices(core_store, r.model);
  return r;
}

RunResult multislice_projection(const SliceStoreSet& stores, const Dims& core_dims, const ConvergenceConfig& cfg,
                                const DecompOptions& options) {
  cfg.validate();
  check_store_set(stores, core_dims);
  const auto& dims = stores.dims();
  const std::size_t order = dims.size();
  for (std::size_t n = 0; n < order; ++n)
    for (std::size_t o = n + 1; o < order; ++o) require_store(stores, n, o);

  RunResult r;
  r.has_empty_slices = stores.any_empty_slices();
  std::vector<MatrixXd> factors(order);
  factors[0] = MatrixXd::Zero(dims[0], core_dims[0]);

  auto update = [&](std::size_t n, std::size_t iteration, bool plain) {
    memory::Reservation gram(static_cast<std::size_t>(dims[n] * dims[n]) * sizeof(double));
    MatrixXd m = MatrixXd::Zero(dims[n], dims[n]);
    for (std::size_t o = 0; o < order; ++o)
      if (o != n) accumulate_slice_gram(stores.for_remaining(n, o), n, plain ? nullptr : &factors[o], m);
    symmetrize_from_lower(m);
    auto step = factor_from_gram(m, core_dims[n], options.eigen);
    r.rank_deficient |= step.completed;
    factors[n] = std::move(step.vectors);
    notify_gram(options, iteration, n, m, factors[n]);
  };

  for (std::size_t n = 1; n < order; ++n) update(n, 0, true);

  const SliceStore& core_store = model_store(stores);
  double prev_fit = 0.0;
  r.terminated_by = Termination::max_iterations;
  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    for (std::size_t n = 0; n < order; ++n) update(n, t, false);
    r.model = TuckerModel{core_from_slices(core_store, factors), factors};
    const double fit = fit_from_slices(core_store, r.model);
    r.fit_history.push_back(fit);
    r.iterations = t;
    r.fit = fit;
    notify_sweep(options, t, r.model, fit, fit);
    if (fit - prev_fit < cfg.fit_threshold) {
      r.terminated_by = Termination::threshold;
      break;
    }
    prev_fit = fit;
  }
  return r;
}

}  // namespace tucker
