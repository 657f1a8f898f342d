#include "tucker/slice_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tucker/detail/binary_io.hpp"

namespace tucker {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* manifest_name = "store.json";
constexpr const char* manifest_format = "tucker-slice-store";

}  // namespace

SliceMatrix::SliceMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("slice dims must be non-negative");
  offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
}

SliceMatrix SliceMatrix::from_triplets(Index rows, Index cols, std::span<const Index> row_idx,
                                       std::span<const Index> col_idx, std::span<const double> values) {
  if (row_idx.size() != values.size() || col_idx.size() != values.size())
    throw std::invalid_argument("from_triplets: array sizes differ");
  SliceMatrix s(rows, cols);
  const std::size_t n = values.size();
  memory::tracked_vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k)
    if (row_idx[k] < 0 || row_idx[k] >= rows || col_idx[k] < 0 || col_idx[k] >= cols)
      throw std::invalid_argument("from_triplets: index out of range");
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return row_idx[a] != row_idx[b] ? row_idx[a] < row_idx[b] : col_idx[a] < col_idx[b];
  });
  for (std::size_t k = 1; k < n; ++k)
    if (row_idx[perm[k]] == row_idx[perm[k - 1]] && col_idx[perm[k]] == col_idx[perm[k - 1]])
      throw std::invalid_argument("duplicate coordinates (row " + std::to_string(row_idx[perm[k]] + 1) +
                                  ", col " + std::to_string(col_idx[perm[k]] + 1) + ")");
  std::size_t kept = 0;
  for (std::size_t k = 0; k < n; ++k) kept += values[k] != 0.0;
  s.columns_.reserve(kept);
  s.values_.reserve(kept);
  for (std::size_t p : perm) {
    if (values[p] == 0.0) continue;
    ++s.offsets_[static_cast<std::size_t>(row_idx[p]) + 1];
    s.columns_.push_back(col_idx[p]);
    s.values_.push_back(values[p]);
  }
  std::partial_sum(s.offsets_.begin(), s.offsets_.end(), s.offsets_.begin());
  return s;
}

SliceMatrix::SparseView SliceMatrix::view() const {
  return SparseView(rows_, cols_, nnz(), offsets_.data(), columns_.data(), values_.data());
}

MatrixXd SliceMatrix::to_dense() const {
  MatrixXd d = MatrixXd::Zero(rows_, cols_);
  for (Index r = 0; r < rows_; ++r)
    for (auto k = offsets_[static_cast<std::size_t>(r)]; k < offsets_[static_cast<std::size_t>(r) + 1]; ++k)
      d(r, columns_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
  return d;
}

double SliceMatrix::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

std::size_t SliceMatrix::serialized_bytes() const {
  return 4 + 4 * 8 + offsets_.size() * 8 + columns_.size() * 8 + values_.size() * 8 + 4;
}

bool SliceMatrix::operator==(const SliceMatrix& o) const {
  return rows_ == o.rows_ && cols_ == o.cols_ && offsets_ == o.offsets_ && columns_ == o.columns_ &&
         values_ == o.values_;
}

void write_slice(std::ostream& out, const SliceMatrix& s) {
  detail::LeWriter w(out);
  w.raw("TSLC", 4);
  w.u64(slice_format_version);
  w.u64(static_cast<std::uint64_t>(s.rows_));
  w.u64(static_cast<std::uint64_t>(s.cols_));
  w.u64(static_cast<std::uint64_t>(s.nnz()));
  w.u64_array<std::int64_t>(s.offsets_);
  w.u64_array<std::int64_t>(s.columns_);
  w.f64_array(s.values_);
  w.checksum();
}

SliceMatrix read_slice(std::istream& in, const std::string& what) {
  detail::LeReader r(in, what);
  r.magic("TSLC");
  const auto version = r.u64();
  if (version != slice_format_version) throw std::runtime_error(what + ": unsupported slice version");
  const auto rows = r.u64();
  const auto cols = r.u64();
  const auto nnz = r.u64();
  constexpr std::uint64_t limit = std::uint64_t{1} << 40;
  if (rows > limit || cols > limit || nnz > limit) throw std::runtime_error(what + ": implausible slice header");
  SliceMatrix s(static_cast<Index>(rows), static_cast<Index>(cols));
  r.u64_array<std::int64_t>(s.offsets_);
  s.columns_.resize(nnz);
  s.values_.resize(nnz);
  r.u64_array<std::int64_t>(s.columns_);
  r.f64_array(s.values_);
  r.verify_checksum();

  if (s.offsets_.front() != 0 || static_cast<std::uint64_t>(s.offsets_.back()) != nnz)
    throw std::runtime_error(what + ": corrupt row offsets");
  for (std::size_t i = 1; i < s.offsets_.size(); ++i)
    if (s.offsets_[i] < s.offsets_[i - 1]) throw std::runtime_error(what + ": corrupt row offsets");
  for (auto c : s.columns_)
    if (c < 0 || static_cast<std::uint64_t>(c) >= cols) throw std::runtime_error(what + ": column out of range");
  return s;
}

SliceLayout SliceLayout::make(const Dims& dims, std::vector<std::size_t> fixed) {
  check_dims(dims);
  const std::size_t order = dims.size();
  if (order != 3 && order != 4) throw std::invalid_argument("slice stores need a 3rd- or 4th-order tensor");
  if (fixed.size() != order - 2) throw std::invalid_argument("slice stores fix all but two modes");
  std::sort(fixed.begin(), fixed.end());
  if (std::adjacent_find(fixed.begin(), fixed.end()) != fixed.end())
    throw std::invalid_argument("fixed modes must be distinct");
  if (fixed.back() >= order) throw std::invalid_argument("fixed mode out of range");
  SliceLayout l{dims, fixed, 0, 0};
  std::vector<std::size_t> rest;
  for (std::size_t m = 0; m < order; ++m)
    if (!std::binary_search(fixed.begin(), fixed.end(), m)) rest.push_back(m);
  l.row_mode = rest[0];
  l.col_mode = rest[1];
  return l;
}

Index SliceLayout::slice_count() const {
  Index n = 1;
  for (auto m : fixed) n *= dims[m];
  return n;
}

std::vector<Index> SliceLayout::fixed_indices(Index s) const {
  if (s < 0 || s >= slice_count()) throw std::out_of_range("slice number out of range");
  if (fixed.size() == 1) return {s};
  return {s / dims[fixed[1]], s % dims[fixed[1]]};
}

Index SliceLayout::slice_number(std::span<const Index> idx) const {
  if (idx.size() != fixed.size()) throw std::invalid_argument("wrong number of fixed indices");
  Index s = 0;
  for (std::size_t k = 0; k < fixed.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= dims[fixed[k]]) throw std::out_of_range("fixed index out of range");
    s = s * dims[fixed[k]] + idx[k];
  }
  return s;
}

fs::path SliceStore::slab_path(Index slab) const {
  char name[32];
  std::snprintf(name, sizeof name, "slab-%06lld.tslc", static_cast<long long>(slab));
  return dir_ / name;
}

SliceStore SliceStore::open(const fs::path& dir) {
  std::ifstream in(dir / manifest_name);
  if (!in) throw std::runtime_error("no slice store manifest in " + dir.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / manifest_name).string() + ": " + e.what());
  }
  if (j.value("format", std::string{}) != manifest_format || j.value("version", 0) != 1)
    throw std::runtime_error((dir / manifest_name).string() + ": not a slice store manifest");
  SliceStore s;
  s.dir_ = dir;
  s.layout_ = SliceLayout::make(j.at("dims").get<Dims>(), j.at("fixed_modes").get<std::vector<std::size_t>>());
  s.slab_size_ = j.at("slab_size").get<Index>();
  s.info_.nnz = j.at("nnz").get<std::uint64_t>();
  s.info_.empty_slices = j.at("empty_slices").get<Index>();
  s.info_.largest_slice_bytes = j.at("largest_slice_bytes").get<std::size_t>();
  s.info_.disk_bytes = j.at("disk_bytes").get<std::uint64_t>();
  s.slab_offsets_ = j.at("slab_offsets").get<std::vector<std::vector<std::uint64_t>>>();
  std::size_t listed = 0;
  for (const auto& v : s.slab_offsets_) listed += v.size();
  if (s.slab_size_ < 1 || listed != static_cast<std::size_t>(s.slice_count()))
    throw std::runtime_error((dir / manifest_name).string() + ": slab table does not cover every slice");
  return s;
}

SliceMatrix SliceStore::load(Index s) const {
  if (s < 0 || s >= slice_count())
    throw std::out_of_range("slice " + std::to_string(s) + " outside [0, " + std::to_string(slice_count()) + ")");
  const Index slab = s / slab_size_;
  const auto path = slab_path(slab);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  in.seekg(static_cast<std::streamoff>(slab_offsets_[static_cast<std::size_t>(slab)][static_cast<std::size_t>(s % slab_size_)]));
  return read_slice(in, path.string() + " slice " + std::to_string(s));
}

void SliceStore::for_each(const std::function<void(Index, const SliceMatrix&)>& fn) const {
  Index s = 0;
  for (std::size_t slab = 0; slab < slab_offsets_.size(); ++slab) {
    const auto path = slab_path(static_cast<Index>(slab));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    for (std::size_t k = 0; k < slab_offsets_[slab].size(); ++k, ++s) {
      const SliceMatrix m = read_slice(in, path.string() + " slice " + std::to_string(s));
      fn(s, m);
    }
  }
}

namespace {

Index auto_slab_size(const SliceLayout& l, std::uint64_t nnz) {
  const double slices = static_cast<double>(l.slice_count());
  const double avg = 40.0 + 8.0 * static_cast<double>(l.rows() + 1) + 16.0 * static_cast<double>(nnz) / slices;
  const auto n = static_cast<Index>(static_cast<double>(default_slab_target_bytes) / avg);
  return std::clamp<Index>(n, 1, l.slice_count());
}

json manifest_json(const SliceLayout& l, Index slab_size, const SliceStoreInfo& info,
                   const std::vector<std::vector<std::uint64_t>>& offsets, const CooFile& input) {
  json j;
  j["format"] = manifest_format;
  j["version"] = 1;
  j["dims"] = l.dims;
  j["fixed_modes"] = l.fixed;
  j["row_mode"] = l.row_mode;
  j["col_mode"] = l.col_mode;
  j["slice_count"] = l.slice_count();
  j["slab_size"] = slab_size;
  j["nnz"] = info.nnz;
  j["empty_slices"] = info.empty_slices;
  j["largest_slice_bytes"] = info.largest_slice_bytes;
  j["disk_bytes"] = info.disk_bytes;
  j["source_records"] = input.records;
  j["source_nnz"] = input.nnz;
  j["slab_offsets"] = offsets;
  return j;
}

}  // namespace

SliceStore build_slice_store(const CooFile& input, std::span<const std::size_t> fixed_modes, const fs::path& dir,
                             const StoreBuildOptions& options) {
  SliceLayout layout = SliceLayout::make(input.dims, {fixed_modes.begin(), fixed_modes.end()});
  if (options.slab_size < 0) throw std::invalid_argument("slab size must be positive");
  const Index slab_size = options.slab_size == 0 ? auto_slab_size(layout, input.nnz)
                                                 : std::min(options.slab_size, layout.slice_count());
  fs::create_directories(dir);
  fs::remove(dir / manifest_name);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".tslc") fs::remove(e.path());

  const fs::path sorted = dir / "sorted.coo.tmp";
  SortOptions sort = options.sort;
  if (sort.temp_dir.empty()) sort.temp_dir = dir;
  external_sort(input, layout.fixed, sorted, sort);

  SliceStoreInfo info;
  std::vector<std::vector<std::uint64_t>> offsets;
  std::ofstream slab;
  fs::path slab_file;
  std::uint64_t slab_bytes = 0;

  auto emit = [&](Index s, const SliceMatrix& m) {
    const Index k = s / slab_size;
    if (static_cast<std::size_t>(k) == offsets.size()) {
      if (slab.is_open()) {
        slab.close();
        if (!slab) throw std::runtime_error("write failed on " + slab_file.string() + " (disk full?)");
      }
      char name[32];
      std::snprintf(name, sizeof name, "slab-%06lld.tslc", static_cast<long long>(k));
      slab_file = dir / name;
      slab.open(slab_file, std::ios::binary | std::ios::trunc);
      if (!slab) throw std::runtime_error("cannot write " + slab_file.string());
      offsets.emplace_back();
      slab_bytes = 0;
    }
    offsets.back().push_back(slab_bytes);
    write_slice(slab, m);
    if (!slab) throw std::runtime_error("write failed on " + slab_file.string() + " (disk full?)");
    const auto bytes = m.serialized_bytes();
    slab_bytes += bytes;
    info.disk_bytes += bytes;
    info.nnz += static_cast<std::uint64_t>(m.nnz());
    info.largest_slice_bytes = std::max(info.largest_slice_bytes, bytes);
    if (m.nnz() == 0) ++info.empty_slices;
  };

  Index next = 0;  // first slice not yet written
  auto emit_empty_until = [&](Index end) {
    const SliceMatrix empty(layout.rows(), layout.cols());
    for (; next < end; ++next) emit(next, empty);
  };

  {
    memory::tracked_vector<Index> rows, cols;
    memory::tracked_vector<double> vals;
    Index current = -1;
    auto flush = [&] {
      if (current < 0) return;
      emit_empty_until(current);
      SliceMatrix m;
      try {
        m = SliceMatrix::from_triplets(layout.rows(), layout.cols(), rows, cols, vals);
      } catch (const std::invalid_argument& e) {
        auto idx = layout.fixed_indices(current);
        std::string where;
        for (std::size_t k = 0; k < idx.size(); ++k)
          where += " i" + std::to_string(layout.fixed[k] + 1) + "=" + std::to_string(idx[k] + 1);
        throw std::invalid_argument(input.path.string() + ": slice" + where + ": " + e.what());
      }
      emit(current, m);
      next = current + 1;
      rows.clear();
      cols.clear();
      vals.clear();
      rows.shrink_to_fit();
      cols.shrink_to_fit();
      vals.shrink_to_fit();
    };

    Index fixed_idx[2];
    for_each_coo_record(sorted, input.dims, [&](const CooRecord& rec, std::uint64_t) {
      for (std::size_t k = 0; k < layout.fixed.size(); ++k) fixed_idx[k] = rec.index[layout.fixed[k]] - 1;
      const Index s = layout.slice_number({fixed_idx, layout.fixed.size()});
      if (s != current) {
        if (s < current) throw std::logic_error("sorted input is out of order");
        flush();
        current = s;
      }
      rows.push_back(rec.index[layout.row_mode] - 1);
      cols.push_back(rec.index[layout.col_mode] - 1);
      vals.push_back(rec.value);
    });
    flush();
  }
  emit_empty_until(layout.slice_count());
  slab.close();
  if (!slab) throw std::runtime_error("write failed on " + slab_file.string() + " (disk full?)");
  fs::remove(sorted);

  {
    const fs::path tmp = dir / "store.json.tmp";
    std::ofstream out(tmp, std::ios::trunc);
    out << manifest_json(layout, slab_size, info, offsets, input).dump() << "\n";
    out.close();
    if (!out) throw std::runtime_error("write failed on " + tmp.string());
    fs::rename(tmp, dir / manifest_name);
  }
  return SliceStore::open(dir);
}

void SliceStoreSet::add(SliceStore store) {
  if (!stores_.empty() && store.layout().dims != dims())
    throw std::invalid_argument("slice stores in one set must share dims");
  auto key = store.layout().fixed;
  stores_.insert_or_assign(std::move(key), std::move(store));
}

const SliceStore& SliceStoreSet::get(const std::vector<std::size_t>& fixed) const {
  auto it = stores_.find(fixed);
  if (it == stores_.end()) throw std::out_of_range("no slice store fixing the requested modes");
  return it->second;
}

bool SliceStoreSet::has_remaining(std::size_t a, std::size_t b) const {
  if (stores_.empty() || a == b) return false;
  const std::size_t order = dims().size();
  if (a >= order || b >= order) return false;
  return contains(fixed_modes_leaving(order, a, b));
}

const SliceStore& SliceStoreSet::for_remaining(std::size_t a, std::size_t b) const {
  if (stores_.empty()) throw std::out_of_range("empty slice store set");
  return get(fixed_modes_leaving(dims().size(), a, b));
}

const Dims& SliceStoreSet::dims() const {
  if (stores_.empty()) throw std::out_of_range("empty slice store set");
  return stores_.begin()->second.layout().dims;
}

bool SliceStoreSet::any_empty_slices() const {
  for (const auto& [k, s] : stores_)
    if (s.info().empty_slices > 0) return true;
  return false;
}

std::vector<std::size_t> fixed_modes_leaving(std::size_t order, std::size_t a, std::size_t b) {
  if (a == b || a >= order || b >= order) throw std::invalid_argument("remaining modes must be two distinct modes");
  std::vector<std::size_t> f;
  for (std::size_t m = 0; m < order; ++m)
    if (m != a && m != b) f.push_back(m);
  return f;
}

std::vector<std::vector<std::size_t>> all_fixed_mode_sets(std::size_t order) {
  if (order == 3) return {{0}, {1}, {2}};
  if (order == 4) return {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  throw std::invalid_argument("slice stores need a 3rd- or 4th-order tensor");
}

std::string store_directory_name(std::span<const std::size_t> fixed) {
  std::string name = fixed.size() == 1 ? "mode" : "modes";
  for (auto m : fixed) name += "-" + std::to_string(m + 1);
  return name;
}

SliceStoreSet prepare_slice_stores(const CooFile& input, const std::vector<std::vector<std::size_t>>& fixed_sets,
                                   const fs::path& root, const StoreBuildOptions& options) {
  SliceStoreSet set;
  for (const auto& fixed : fixed_sets) {
    const fs::path dir = root / store_directory_name(fixed);
    bool reused = false;
    if (fs::exists(dir / manifest_name)) {
      try {
        std::ifstream in(dir / manifest_name);
        const json j = json::parse(in);
        auto sorted_fixed = fixed;
        std::sort(sorted_fixed.begin(), sorted_fixed.end());
        Index count = 1;
        for (auto m : sorted_fixed) count *= input.dims.at(m);
        const bool same_slab =
            options.slab_size == 0 || j.at("slab_size").get<Index>() == std::min(options.slab_size, count);
        if (j.at("dims").get<Dims>() == input.dims &&
            j.at("fixed_modes").get<std::vector<std::size_t>>() == sorted_fixed &&
            j.at("source_records").get<std::uint64_t>() == input.records &&
            j.at("source_nnz").get<std::uint64_t>() == input.nnz && same_slab) {
          set.add(SliceStore::open(dir));
          reused = true;
        }
      } catch (const std::exception&) {
        reused = false;
      }
    }
    if (!reused) set.add(build_slice_store(input, fixed, dir, options));
  }
  return set;
}

}  // namespace tucker
