#include "tucker/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include <zlib.h>

#include "json.hpp"

namespace tucker {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s, std::string_view seps) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (b < s.size()) {
    while (b < s.size() && seps.find(s[b]) != std::string_view::npos) ++b;
    std::size_t e = b;
    while (e < s.size() && seps.find(s[e]) == std::string_view::npos) ++e;
    if (e > b) out.push_back(s.substr(b, e - b));
    b = e;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  s = trim(s);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw std::invalid_argument(std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

std::uint64_t file_bytes(const fs::path& p) {
  std::error_code ec;
  const auto n = fs::file_size(p, ec);
  return ec ? 0 : static_cast<std::uint64_t>(n);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string format_dims(const Dims& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(d[i]);
  }
  return s;
}

Dims parse_dims(std::string_view text) {
  Dims d;
  for (auto tok : split_list(text, "x, \t")) d.push_back(parse_number<Index>(tok, "dimension"));
  if (d.empty()) throw std::invalid_argument("empty dimension list");
  return d;
}

std::size_t parse_byte_size(std::string_view text) {
  text = trim(text);
  std::size_t mult = 1;
  if (!text.empty()) {
    switch (std::toupper(static_cast<unsigned char>(text.back()))) {
      case 'K': mult = std::size_t{1} << 10; break;
      case 'M': mult = std::size_t{1} << 20; break;
      case 'G': mult = std::size_t{1} << 30; break;
      default: break;
    }
    if (mult != 1) text.remove_suffix(1);
  }
  return parse_number<std::size_t>(text, "byte size") * mult;
}

CooFile gen_random_tensor(const Dims& dims, double density, std::uint64_t seed, const fs::path& out) {
  check_dims(dims);
  if (dims.size() < min_order || dims.size() > max_order) throw std::invalid_argument("order must be 2 to 4");
  if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("density must be in (0, 1]");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + out.string());

  std::mt19937_64 rng(seed);
  auto draw = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  CooFile coo{out, dims, 0, 0};
  std::vector<Index> idx(dims.size(), 1);
  std::string buf;
  buf.reserve(1 << 20);
  const Index total = product(dims);
  for (Index cell = 0; cell < total; ++cell) {
    if (draw() < density) {
      const double v = draw();
      format_coo_line(buf, idx, v);
      buf.push_back('\n');
      ++coo.records;
      if (v != 0.0) ++coo.nnz;
      if (buf.size() > (1 << 20) - 128) {
        file.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
      }
    }
    for (std::size_t n = dims.size(); n-- > 0;) {
      if (++idx[n] <= dims[n]) break;
      idx[n] = 1;
    }
  }
  file.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  file.close();
  if (!file) throw std::runtime_error("write failed on " + out.string() + " (disk full?)");
  return coo;
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::hosvd: return "hosvd";
    case Algorithm::hooi: return "hooi";
    case Algorithm::sp: return "sp";
    case Algorithm::mp: return "mp";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  name = trim(name);
  if (name == "hosvd") return Algorithm::hosvd;
  if (name == "hooi") return Algorithm::hooi;
  if (name == "sp") return Algorithm::sp;
  if (name == "mp") return Algorithm::mp;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "' (hosvd, hooi, sp, mp)");
}

std::string input_content_key(const fs::path& path, const Dims& dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  uLong crc = crc32(0L, Z_NULL, 0);
  uLong adler = adler32(0L, Z_NULL, 0);
  std::uint64_t size = 0;
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<uInt>(in.gcount());
    if (n == 0) break;
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), n);
    adler = adler32(adler, reinterpret_cast<const Bytef*>(buf.data()), n);
    size += n;
  }
  char key[64];
  std::snprintf(key, sizeof key, "%08lx%08lx-%llu-", static_cast<unsigned long>(crc & 0xffffffffUL),
                static_cast<unsigned long>(adler & 0xffffffffUL), static_cast<unsigned long long>(size));
  return key + format_dims(dims);
}

RunOutcome run(const RunConfig& config) {
  check_core_dims(config.dims, config.core);
  RunOutcome o;
  auto& m = o.metrics;
  m.algorithm = to_string(config.algorithm);
  m.dims = config.dims;
  m.core = config.core;
  m.input_bytes = file_bytes(config.input);

  CooParseOptions parse;
  parse.check_duplicates = false;  // caught while loading or slicing instead
  const CooFile coo = parse_coo(config.input, config.dims, parse);
  m.nnz = coo.nnz;
  m.density = static_cast<double>(coo.nnz) / static_cast<double>(product(config.dims));

  if (config.algorithm == Algorithm::hosvd || config.algorithm == Algorithm::hooi) {
    memory::PeakScope scope;
    auto t0 = std::chrono::steady_clock::now();
    const SparseTensor x = load_sparse(coo);
    m.prepare_seconds = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    o.result = config.algorithm == Algorithm::hosvd ? ho_svd_run(x, config.core, config.decomp)
                                                    : hooi(x, config.core, config.convergence, config.decomp);
    m.seconds = seconds_since(t0);
    m.peak_bytes = scope.peak_bytes();
  } else {
    const std::size_t order = config.dims.size();
    if (order != 3 && order != 4) throw std::invalid_argument("sp and mp need a 3rd- or 4th-order tensor");
    const fs::path work =
        config.work_dir.empty() ? fs::path(config.input.string() + ".stores") : config.work_dir;
    const fs::path root = work / input_content_key(config.input, config.dims);
    const auto sets = config.algorithm == Algorithm::sp ? sp_required_stores(order, config.decomp.sp_order)
                                                        : mp_required_stores(order);
    StoreBuildOptions build;
    build.slab_size = config.slab_size;
    build.sort.buffer_bytes = config.sort_buffer_bytes;
    SliceStoreSet stores;
    {
      memory::PeakScope scope;
      const auto t0 = std::chrono::steady_clock::now();
      stores = prepare_slice_stores(coo, sets, root, build);
      m.prepare_seconds = seconds_since(t0);
      m.prepare_peak_bytes = scope.peak_bytes();
    }
    for (const auto& [k, s] : stores) m.store_bytes += s.info().disk_bytes;
    memory::PeakScope scope;
    const auto t0 = std::chrono::steady_clock::now();
    o.result = config.algorithm == Algorithm::sp
                   ? slice_projection(stores, config.core, config.convergence, config.decomp)
                   : multislice_projection(stores, config.core, config.convergence, config.decomp);
    m.seconds = seconds_since(t0);
    m.peak_bytes = scope.peak_bytes();
  }
  m.fit = o.result.fit;
  m.iterations = o.result.iterations;
  m.terminated_by = to_string(o.result.terminated_by);
  m.rank_deficient = o.result.rank_deficient;
  m.empty_slices = o.result.has_empty_slices;
  if (!config.output.empty()) {
    save_model(config.output, o.result.model);
    m.output_bytes = file_bytes(config.output);
  }
  return o;
}

std::string metrics_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["algorithm"] = m.algorithm;
  j["dims"] = m.dims;
  j["core"] = m.core;
  j["density"] = m.density;
  j["nnz"] = m.nnz;
  j["fit"] = m.fit;
  j["iterations"] = m.iterations;
  j["terminated_by"] = m.terminated_by;
  j["seconds"] = m.seconds;
  j["prepare_seconds"] = m.prepare_seconds;
  j["peak_bytes"] = m.peak_bytes;
  j["prepare_peak_bytes"] = m.prepare_peak_bytes;
  j["input_bytes"] = m.input_bytes;
  j["output_bytes"] = m.output_bytes;
  j["store_bytes"] = m.store_bytes;
  j["rank_deficient"] = m.rank_deficient;
  j["empty_slices"] = m.empty_slices;
  return j.dump(2);
}

// ---- bench spec ------------------------------------------------------------

namespace {

struct Block {
  std::string kind;  // instance, size, ratio, core4
  std::string name;
  std::size_t line = 0;
  std::map<std::string, std::string> keys;
};

std::vector<double> parse_real_list(std::string_view v) {
  std::vector<double> out;
  for (auto t : split_list(v, ", \t")) out.push_back(parse_number<double>(t, "number"));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::vector<Index> parse_int_list(std::string_view v) {
  std::vector<Index> out;
  for (auto t : split_list(v, ", \t")) out.push_back(parse_number<Index>(t, "integer"));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view v) {
  std::vector<std::uint64_t> out;
  for (auto t : split_list(v, ", \t")) {
    const auto dots = t.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(parse_number<std::uint64_t>(t, "seed"));
      continue;
    }
    const auto a = parse_number<std::uint64_t>(t.substr(0, dots), "seed");
    const auto b = parse_number<std::uint64_t>(t.substr(dots + 2), "seed");
    if (b < a) throw std::invalid_argument("descending seed range");
    for (auto s = a; s <= b; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no seeds");
  return out;
}

const std::map<std::string, std::vector<std::string>>& block_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"instance", {"dims", "core", "density"}},
      {"size", {"sides", "core_fraction", "order", "density"}},
      {"ratio", {"side", "middle", "ratios", "density"}},
      {"core4", {"side", "core_sides", "density"}},
  };
  return keys;
}

Index clamp_core(double v, Index side) { return std::clamp<Index>(static_cast<Index>(std::llround(v)), 1, side); }

void expand_block(const Block& b, double default_density, std::vector<BenchInstance>& out) {
  auto need = [&](const char* key) -> const std::string& {
    auto it = b.keys.find(key);
    if (it == b.keys.end()) throw std::invalid_argument(std::string("missing '") + key + "'");
    return it->second;
  };
  auto opt = [&](const char* key, const std::string& fallback) {
    auto it = b.keys.find(key);
    return it == b.keys.end() ? fallback : it->second;
  };
  const double density =
      b.keys.count("density") ? parse_number<double>(b.keys.at("density"), "density") : default_density;

  if (b.kind == "instance") {
    BenchInstance in{"instance", b.name, parse_dims(need("dims")), parse_dims(need("core")), density, 0.0};
    out.push_back(std::move(in));
  } else if (b.kind == "size") {
    const double frac = parse_number<double>(opt("core_fraction", "0.1"), "core_fraction");
    const auto order = parse_number<std::size_t>(opt("order", "3"), "order");
    for (Index side : parse_int_list(need("sides"))) {
      BenchInstance in{"size", "size-" + std::to_string(side), Dims(order, side),
                       Dims(order, clamp_core(frac * static_cast<double>(side), side)), density,
                       static_cast<double>(side)};
      out.push_back(std::move(in));
    }
  } else if (b.kind == "ratio") {
    const Index side = parse_number<Index>(need("side"), "side");
    const Index mid = parse_number<Index>(need("middle"), "middle");
    for (double r : parse_real_list(need("ratios"))) {
      if (!(r > 0)) throw std::invalid_argument("ratios must be positive");
      const double md = static_cast<double>(mid);
      BenchInstance in{"ratio", "ratio-" + format_double(r), Dims(3, side),
                       Dims{clamp_core(md * r, side), std::min(mid, side), clamp_core(md / r, side)}, density, r};
      out.push_back(std::move(in));
    }
  } else if (b.kind == "core4") {
    const Index side = parse_number<Index>(need("side"), "side");
    for (Index c : parse_int_list(need("core_sides"))) {
      BenchInstance in{"core4", "core4-" + std::to_string(c), Dims(4, side), Dims(4, c), density,
                       static_cast<double>(c)};
      out.push_back(std::move(in));
    }
  }
}

}  // namespace

BenchSpec parse_bench_spec(std::istream& in, const std::string& source) {
  BenchSpec spec;
  std::vector<Block> blocks;
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](std::size_t line, const std::string& msg) -> std::invalid_argument {
    return std::invalid_argument(source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) throw fail(line_no, "expected key = value");
    try {
      if (key == "instance") {
        blocks.push_back({"instance", value, line_no, {}});
      } else if (key == "sweep") {
        if (!block_keys().count(value) || value == "instance")
          throw std::invalid_argument("unknown sweep '" + value + "' (size, ratio, core4)");
        blocks.push_back({value, value, line_no, {}});
      } else if (!blocks.empty()) {
        const auto& allowed = block_keys().at(blocks.back().kind);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
          throw std::invalid_argument("unknown key '" + key + "' in " + blocks.back().kind + " block");
        if (!blocks.back().keys.emplace(key, value).second) throw std::invalid_argument("repeated key '" + key + "'");
      } else if (key == "seeds") {
        spec.seeds = parse_seeds(value);
      } else if (key == "algorithms") {
        spec.algorithms.clear();
        for (auto t : split_list(value, ", \t")) spec.algorithms.push_back(parse_algorithm(t));
      } else if (key == "density") {
        spec.density = parse_number<double>(value, "density");
      } else if (key == "tol") {
        spec.convergence.fit_threshold = spec.convergence.core_growth_threshold = parse_number<double>(value, "tol");
      } else if (key == "fit_tol") {
        spec.convergence.fit_threshold = parse_number<double>(value, "fit_tol");
      } else if (key == "growth_tol") {
        spec.convergence.core_growth_threshold = parse_number<double>(value, "growth_tol");
      } else if (key == "max_iters") {
        spec.convergence.max_iterations = parse_number<std::size_t>(value, "max_iters");
      } else if (key == "sort_buffer") {
        spec.sort_buffer_bytes = parse_byte_size(value);
      } else if (key == "slab_size") {
        spec.slab_size = parse_number<Index>(value, "slab_size");
      } else if (key == "work_dir") {
        spec.work_dir = value;
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw fail(line_no, e.what());
    }
  }
  for (const auto& b : blocks) {
    try {
      const std::size_t before = spec.instances.size();
      expand_block(b, spec.density, spec.instances);
      for (std::size_t i = before; i < spec.instances.size(); ++i) {
        const auto& inst = spec.instances[i];
        check_core_dims(inst.dims, inst.core);
        if (!(inst.density > 0 && inst.density <= 1)) throw std::invalid_argument("density must be in (0, 1]");
      }
    } catch (const std::invalid_argument& e) {
      throw fail(b.line, e.what());
    }
  }
  try {
    spec.convergence.validate();
    if (!(spec.density > 0 && spec.density <= 1)) throw std::invalid_argument("density must be in (0, 1]");
    if (spec.algorithms.empty()) throw std::invalid_argument("no algorithms");
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  if (spec.instances.empty()) throw std::invalid_argument(source + ": no instances or sweeps");
  return spec;
}

BenchSpec load_bench_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_bench_spec(in, path.string());
}

std::vector<BenchRow> run_bench(const BenchSpec& spec, const BenchOptions& options) {
  struct Cell {
    const BenchInstance* instance;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& inst : spec.instances)
    for (auto seed : spec.seeds) cells.push_back({&inst, seed});

  std::vector<std::vector<BenchRow>> results(cells.size());
  auto run_cell = [&](std::size_t c) {
    const auto& cell = cells[c];
    const fs::path dir = spec.work_dir / (cell.instance->name + "-seed" + std::to_string(cell.seed));
    fs::create_directories(dir);
    const auto coo = gen_random_tensor(cell.instance->dims, cell.instance->density, cell.seed, dir / "tensor.coo");
    for (auto alg : spec.algorithms) {
      RunConfig cfg;
      cfg.algorithm = alg;
      cfg.input = coo.path;
      cfg.dims = cell.instance->dims;
      cfg.core = cell.instance->core;
      cfg.convergence = spec.convergence;
      cfg.decomp.seed = cell.seed;
      cfg.sort_buffer_bytes = spec.sort_buffer_bytes;
      cfg.slab_size = spec.slab_size;
      cfg.work_dir = dir / "stores";
      cfg.output = dir / (std::string(to_string(alg)) + ".tkrd");
      BenchRow row{*cell.instance, cell.seed, run(cfg).metrics};
      row.metrics.density = cell.instance->density;
      results[c].push_back(std::move(row));
    }
    if (!options.keep_files) fs::remove_all(dir);
  };

  const unsigned jobs = std::max(1u, options.jobs);
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) {
          try {
            run_cell(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  if (!options.keep_files) {
    std::error_code ec;
    fs::remove(spec.work_dir, ec);  // only succeeds when nothing else lives there
  }
  std::vector<BenchRow> rows;
  for (auto& r : results)
    for (auto& row : r) rows.push_back(std::move(row));
  return rows;
}

std::vector<std::string> bench_csv_header() {
  return {"schema",       "group",          "instance",   "parameter",       "algorithm",
          "seed",         "dims",           "core",       "density",         "nnz",
          "fit",          "iterations",     "terminated_by", "seconds",      "prepare_seconds",
          "peak_bytes",   "prepare_peak_bytes", "input_bytes", "output_bytes", "store_bytes",
          "rank_deficient", "empty_slices"};
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool deterministic) {
  const auto header = bench_csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\r\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const std::vector<std::string> f{
        std::to_string(bench_csv_schema), r.instance.group, r.instance.name, format_double(r.instance.parameter),
        m.algorithm, std::to_string(r.seed), format_dims(m.dims), format_dims(m.core), format_double(m.density),
        std::to_string(m.nnz), format_double(m.fit), std::to_string(m.iterations), m.terminated_by,
        deterministic ? "0" : format_double(m.seconds), deterministic ? "0" : format_double(m.prepare_seconds),
        std::to_string(m.peak_bytes), std::to_string(m.prepare_peak_bytes), std::to_string(m.input_bytes),
        std::to_string(m.output_bytes), std::to_string(m.store_bytes), m.rank_deficient ? "1" : "0",
        m.empty_slices ? "1" : "0"};
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << csv_field(f[i]);
    out << "\r\n";
  }
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && in.peek() == '\n') in.get(c);
      end_field();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
  if (any) {
    end_field();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<std::vector<std::string>>& csv) {
  if (csv.empty()) throw std::invalid_argument("empty CSV");
  const auto& header = csv[0];
  auto col = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument(std::string("CSV lacks column '") + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_group = col("group"), c_inst = col("instance"), c_param = col("parameter"), c_alg = col("algorithm"),
             c_seed = col("seed"), c_fit = col("fit"), c_iter = col("iterations"), c_sec = col("seconds"),
             c_peak = col("peak_bytes");

  struct Acc {
    std::string group, instance, parameter, algorithm;
    std::size_t n = 0, rel_n = 0;
    double fit = 0, rel = 0, iterations = 0, seconds = 0, peak = 0;
  };
  std::vector<Acc> accs;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  std::map<std::tuple<std::string, std::string, std::string>, double> hosvd_fit;  // (group, instance, seed)
  for (std::size_t r = 1; r < csv.size(); ++r) {
    const auto& row = csv[r];
    if (row.size() != header.size()) throw std::invalid_argument("CSV row " + std::to_string(r + 1) + " has wrong width");
    if (row[c_alg] == "hosvd") hosvd_fit[{row[c_group], row[c_inst], row[c_seed]}] = std::stod(row[c_fit]);
  }
  for (std::size_t r = 1; r < csv.size(); ++r) {
    const auto& row = csv[r];
    const auto key = std::make_tuple(row[c_group], row[c_inst], row[c_alg]);
    auto [it, fresh] = index.emplace(key, accs.size());
    if (fresh) accs.push_back({row[c_group], row[c_inst], row[c_param], row[c_alg]});
    auto& a = accs[it->second];
    const double fit = std::stod(row[c_fit]);
    ++a.n;
    a.fit += fit;
    a.iterations += std::stod(row[c_iter]);
    a.seconds += std::stod(row[c_sec]);
    a.peak += std::stod(row[c_peak]);
    auto h = hosvd_fit.find({row[c_group], row[c_inst], row[c_seed]});
    if (h != hosvd_fit.end() && h->second != 0.0) {
      a.rel += 100.0 * (fit - h->second) / h->second;
      ++a.rel_n;
    }
  }
  out << "group,instance,parameter,algorithm,seeds,mean_fit,mean_relative_fit_pct,mean_iterations,mean_seconds,"
         "mean_peak_bytes\r\n";
  for (const auto& a : accs) {
    const double n = static_cast<double>(a.n);
    out << csv_field(a.group) << ',' << csv_field(a.instance) << ',' << csv_field(a.parameter) << ','
        << csv_field(a.algorithm) << ',' << a.n << ',' << format_double(a.fit / n) << ','
        << (a.rel_n ? format_double(a.rel / static_cast<double>(a.rel_n)) : std::string()) << ','
        << format_double(a.iterations / n) << ',' << format_double(a.seconds / n) << ','
        << format_double(a.peak / n) << "\r\n";
  }
}

}  // namespace tucker
