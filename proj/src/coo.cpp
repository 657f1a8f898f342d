#include "tucker/coo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace tucker {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view next_token(std::string_view& rest) {
  std::size_t b = 0;
  while (b < rest.size() && is_space(rest[b])) ++b;
  std::size_t e = b;
  while (e < rest.size() && !is_space(rest[e])) ++e;
  std::string_view tok = rest.substr(b, e - b);
  rest.remove_prefix(e);
  return tok;
}

std::uint64_t lexicographic_key(std::span<const Index> idx, const Dims& dims) {
  std::uint64_t key = 0;
  for (std::size_t n = 0; n < dims.size(); ++n)
    key = key * static_cast<std::uint64_t>(dims[n]) + static_cast<std::uint64_t>(idx[n]);
  return key;
}

}  // namespace

std::optional<CooRecord> parse_coo_line(std::string_view line, const Dims& dims) {
  std::string_view rest = line;
  std::string_view tok = next_token(rest);
  if (tok.empty()) return std::nullopt;

  CooRecord rec;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (n > 0) tok = next_token(rest);
    if (tok.empty())
      throw std::invalid_argument("expected " + std::to_string(dims.size()) + " indices and a value");
    Index v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      throw std::invalid_argument("non-numeric index '" + std::string(tok) + "'");
    if (v < 1 || v > dims[n])
      throw std::invalid_argument("index " + std::to_string(v) + " in mode " + std::to_string(n + 1) +
                                  " outside [1, " + std::to_string(dims[n]) + "]");
    rec.index[n] = v;
  }
  tok = next_token(rest);
  if (tok.empty()) throw std::invalid_argument("missing value");
  {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), rec.value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      throw std::invalid_argument("non-numeric value '" + std::string(tok) + "'");
    if (!std::isfinite(rec.value)) throw std::invalid_argument("non-finite value");
  }
  if (!next_token(rest).empty()) throw std::invalid_argument("trailing tokens after value");
  return rec;
}

void format_coo_line(std::string& out, std::span<const Index> index_one_based, double value) {
  char buf[32];
  for (Index i : index_one_based) {
    auto r = std::to_chars(buf, buf + sizeof buf, i);
    out.append(buf, r.ptr);
    out.push_back(' ');
  }
  auto r = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, r.ptr);
}

void for_each_coo_record(const std::filesystem::path& path, const Dims& dims,
                         const std::function<void(const CooRecord&, std::uint64_t)>& fn) {
  check_dims(dims);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::optional<CooRecord> rec;
    try {
      rec = parse_coo_line(line, dims);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path, line_no, e.what());
    }
    if (rec) fn(*rec, line_no);
  }
  if (in.bad()) throw std::runtime_error("read error on " + path.string());
}

CooFile parse_coo(const std::filesystem::path& path, Dims dims, const CooParseOptions& options) {
  CooFile file{path, std::move(dims), 0, 0};
  std::unordered_set<std::uint64_t> seen;
  for_each_coo_record(path, file.dims, [&](const CooRecord& rec, std::uint64_t line_no) {
    ++file.records;
    if (rec.value != 0.0) ++file.nnz;
    if (options.check_duplicates) {
      std::array<Index, max_order> zero_based{};
      for (std::size_t n = 0; n < file.dims.size(); ++n) zero_based[n] = rec.index[n] - 1;
      const auto key = lexicographic_key({zero_based.data(), file.dims.size()}, file.dims);
      if (!seen.insert(key).second) throw ParseError(path, line_no, "duplicate coordinates");
    }
  });
  return file;
}

SparseTensor::SparseTensor(Dims dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  finalize();
}

SparseTensor SparseTensor::from_entries(Dims dims, std::span<const Index> indices, std::span<const double> values) {
  SparseTensor t;
  t.dims_ = std::move(dims);
  check_dims(t.dims_);
  const std::size_t order = t.dims_.size();
  if (indices.size() != values.size() * order)
    throw std::invalid_argument("from_entries: index array does not match value count");
  for (std::size_t k = 0; k < values.size(); ++k) {
    for (std::size_t n = 0; n < order; ++n) {
      const Index i = indices[k * order + n];
      if (i < 0 || i >= t.dims_[n]) throw std::invalid_argument("from_entries: index out of range");
    }
    if (values[k] == 0.0) continue;
    t.indices_.insert(t.indices_.end(), indices.begin() + static_cast<std::ptrdiff_t>(k * order),
                      indices.begin() + static_cast<std::ptrdiff_t>((k + 1) * order));
    t.values_.push_back(values[k]);
  }
  t.finalize();
  return t;
}

SparseTensor SparseTensor::from_dense(const Tensor& x) {
  SparseTensor t;
  t.dims_ = x.dims();
  const std::size_t order = t.dims_.size();
  std::vector<Index> idx(order, 0);
  // Walk in mode-0-most-significant order so the result is already sorted.
  const Index total = x.size();
  std::vector<Index> strides(order, 1);
  for (std::size_t n = 1; n < order; ++n) strides[n] = strides[n - 1] * t.dims_[n - 1];
  for (Index lex = 0; lex < total; ++lex) {
    Index rem = lex, lin = 0;
    for (std::size_t n = order; n-- > 0;) {
      idx[n] = rem % t.dims_[n];
      rem /= t.dims_[n];
      lin += idx[n] * strides[n];
    }
    const double v = x.data()[lin];
    if (v == 0.0) continue;
    t.indices_.insert(t.indices_.end(), idx.begin(), idx.end());
    t.values_.push_back(v);
  }
  t.finalize();
  return t;
}

void SparseTensor::finalize() {
  const std::size_t order = dims_.size();
  const std::size_t nnz = values_.size();
  memory::tracked_vector<std::uint64_t> keys(nnz);
  for (std::size_t k = 0; k < nnz; ++k) keys[k] = lexicographic_key(indices_of(k), dims_);
  if (!std::is_sorted(keys.begin(), keys.end())) {
    memory::tracked_vector<std::size_t> perm(nnz);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    memory::tracked_vector<Index> idx(indices_.size());
    memory::tracked_vector<double> val(nnz);
    memory::tracked_vector<std::uint64_t> sorted_keys(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
      std::copy_n(indices_.begin() + static_cast<std::ptrdiff_t>(perm[k] * order), order,
                  idx.begin() + static_cast<std::ptrdiff_t>(k * order));
      val[k] = values_[perm[k]];
      sorted_keys[k] = keys[perm[k]];
    }
    indices_.swap(idx);
    values_.swap(val);
    keys.swap(sorted_keys);
  }
  for (std::size_t k = 1; k < nnz; ++k)
    if (keys[k] == keys[k - 1]) throw std::invalid_argument("sparse tensor has duplicate coordinates");

  slice_offsets_.assign(static_cast<std::size_t>(dims_[0]) + 1, 0);
  for (std::size_t k = 0; k < nnz; ++k) ++slice_offsets_[static_cast<std::size_t>(index(k, 0)) + 1];
  std::partial_sum(slice_offsets_.begin(), slice_offsets_.end(), slice_offsets_.begin());
}

double SparseTensor::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double SparseTensor::norm() const { return std::sqrt(squared_norm()); }

Tensor SparseTensor::to_dense() const {
  Tensor x(dims_);
  for (std::size_t k = 0; k < nnz(); ++k) x.at(indices_of(k)) = values_[k];
  return x;
}

std::pair<std::size_t, std::size_t> SparseTensor::mode0_slice(Index i) const {
  return {slice_offsets_.at(static_cast<std::size_t>(i)), slice_offsets_.at(static_cast<std::size_t>(i) + 1)};
}

SparseTensor load_sparse(const CooFile& file) {
  SparseTensor t;
  t.dims_ = file.dims;
  check_dims(t.dims_);
  const std::size_t order = t.dims_.size();
  t.indices_.reserve(file.nnz * order);
  t.values_.reserve(file.nnz);
  for_each_coo_record(file.path, file.dims, [&](const CooRecord& rec, std::uint64_t) {
    if (rec.value == 0.0) return;
    for (std::size_t n = 0; n < order; ++n) t.indices_.push_back(rec.index[n] - 1);
    t.values_.push_back(rec.value);
  });
  t.finalize();
  return t;
}

void write_coo(const std::filesystem::path& path, const SparseTensor& x) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::string line;
  std::array<Index, max_order> one_based{};
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    for (std::size_t n = 0; n < x.order(); ++n) one_based[n] = x.index(k, n) + 1;
    line.clear();
    format_coo_line(line, {one_based.data(), x.order()}, x.value(k));
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed on " + path.string());
}

}  // namespace tucker
