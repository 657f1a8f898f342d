#include "tucker/model.hpp"

#include <fstream>

#include "tucker/detail/binary_io.hpp"

namespace tucker {

Dims TuckerModel::dims() const {
  Dims d;
  for (const auto& a : factors) d.push_back(a.rows());
  return d;
}

void TuckerModel::validate() const {
  if (factors.size() != core.order())
    throw std::invalid_argument("model has " + std::to_string(factors.size()) + " factors for a core of order " +
                                std::to_string(core.order()));
  for (std::size_t n = 0; n < factors.size(); ++n)
    if (factors[n].cols() != core.dim(n) || factors[n].rows() < 1)
      throw std::invalid_argument("factor " + std::to_string(n + 1) + " does not match core dimension");
}

bool TuckerModel::operator==(const TuckerModel& other) const {
  if (!(core == other.core) || factors.size() != other.factors.size()) return false;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    const auto& a = factors[n];
    const auto& b = other.factors[n];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (!std::equal(a.data(), a.data() + a.size(), b.data())) return false;
  }
  return true;
}

double orthonormality_error(const TuckerModel& model) {
  double err = 0.0;
  for (const auto& a : model.factors) {
    const MatrixXd d = a.transpose() * a - MatrixXd::Identity(a.cols(), a.cols());
    if (d.size() > 0) err = std::max(err, d.cwiseAbs().maxCoeff());
  }
  return err;
}

void save_model(const std::filesystem::path& path, const TuckerModel& model) {
  model.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  detail::LeWriter w(out);
  w.raw("TKRD", 4);
  w.u64(model_format_version);
  w.u64(model.order());
  const Dims dims = model.dims();
  w.u64_array<Index>(dims);
  w.u64_array<Index>(model.core.dims());
  w.f64_array(model.core.values());
  for (const auto& a : model.factors) w.f64_array({a.data(), static_cast<std::size_t>(a.size())});
  w.checksum();
  out.flush();
  if (!out) throw std::runtime_error("write failed on " + path.string() + " (disk full?)");
}

TuckerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  detail::LeReader r(in, path.string());
  r.magic("TKRD");
  if (r.u64() != model_format_version) throw std::runtime_error(path.string() + ": unsupported model version");
  const auto order = r.u64();
  if (order < min_order || order > max_order) throw std::runtime_error(path.string() + ": unsupported order");
  Dims dims(order), core_dims(order);
  r.u64_array<Index>(dims);
  r.u64_array<Index>(core_dims);
  for (std::size_t n = 0; n < order; ++n)
    if (dims[n] < 1 || core_dims[n] < 1 || dims[n] > (Index{1} << 32) || core_dims[n] > dims[n])
      throw std::runtime_error(path.string() + ": corrupt dimensions");
  TuckerModel m;
  m.core = Tensor(core_dims);
  r.f64_array(m.core.values());
  for (std::size_t n = 0; n < order; ++n) {
    MatrixXd a(dims[n], core_dims[n]);
    r.f64_array({a.data(), static_cast<std::size_t>(a.size())});
    m.factors.push_back(std::move(a));
  }
  r.verify_checksum();
  return m;
}

}  // namespace tucker
