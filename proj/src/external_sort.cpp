#include "tucker/external_sort.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>
#include <queue>
#include <string>
#include <vector>

namespace tucker {

namespace {

using SortKey = std::array<Index, 2>;

struct RunEntry {
  SortKey key;
  std::size_t offset;
  std::size_t length;
};

SortKey key_of(const CooRecord& rec, std::span<const std::size_t> modes) {
  SortKey k{0, 0};
  for (std::size_t i = 0; i < modes.size(); ++i) k[i] = rec.index[modes[i]];
  return k;
}

void write_checked(std::ofstream& out, const char* data, std::size_t n, const std::filesystem::path& path) {
  out.write(data, static_cast<std::streamsize>(n));
  if (!out) throw std::runtime_error("write failed on " + path.string() + " (disk full?)");
}

// One sorted run held in memory. Storage is reserved once, sized from the
// input when its size is known, so reallocation never doubles the footprint
// past the budget.
class RunBuffer {
 public:
  RunBuffer(std::size_t budget, std::uint64_t input_bytes, std::uint64_t input_records)
      : text_budget_(budget * 2 / 5), entry_budget_(budget * 3 / 5 / sizeof(RunEntry)) {
    if (input_records > 0) {
      text_.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(text_budget_, input_bytes)));
      entries_.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(entry_budget_, input_records)));
    }
  }

  bool fits(std::size_t line_length) const {
    return text_.size() + line_length <= text_budget_ && entries_.size() + 1 <= entry_budget_;
  }
  bool empty() const { return entries_.empty(); }

  void add(const SortKey& key, std::string_view line) {
    if (line.size() > text_budget_) throw std::runtime_error("external_sort: line longer than the sort buffer");
    grow(text_, text_.size() + line.size(), text_budget_);
    grow(entries_, entries_.size() + 1, entry_budget_);
    entries_.push_back({key, text_.size(), line.size()});
    text_.insert(text_.end(), line.begin(), line.end());
  }

  void sort() {
    std::stable_sort(entries_.begin(), entries_.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.key < b.key; });
  }

  void write(std::ofstream& out, const std::filesystem::path& path) const {
    for (const auto& e : entries_) {
      write_checked(out, text_.data() + e.offset, e.length, path);
      write_checked(out, "\n", 1, path);
    }
  }

  void clear() {
    text_.clear();
    entries_.clear();
  }

 private:
  template <typename Vec>
  static void grow(Vec& v, std::size_t needed, std::size_t cap) {
    if (needed <= v.capacity()) return;
    v.reserve(std::min(std::max<std::size_t>({needed, v.capacity() * 2, 4096}), cap));
  }

  std::size_t text_budget_;
  std::size_t entry_budget_;
  memory::tracked_vector<char> text_;
  memory::tracked_vector<RunEntry> entries_;
};

struct RunReader {
  std::ifstream in;
  std::string line;
  SortKey key{};
  std::size_t run = 0;
};

}  // namespace

SortStats external_sort(const CooFile& input, std::span<const std::size_t> key_modes,
                        const std::filesystem::path& output, const SortOptions& options) {
  if (key_modes.empty() || key_modes.size() > 2) throw std::invalid_argument("external_sort: one or two key modes");
  for (std::size_t m : key_modes)
    if (m >= input.order()) throw std::invalid_argument("external_sort: key mode out of range");
  if (options.buffer_bytes < min_sort_buffer_bytes)
    throw std::invalid_argument("external_sort: buffer of " + std::to_string(options.buffer_bytes) +
                                " bytes is below the 1 MiB minimum");
  if (std::filesystem::exists(output) && std::filesystem::equivalent(input.path, output))
    throw std::invalid_argument("external_sort: output must differ from input");

  const std::filesystem::path temp_dir =
      options.temp_dir.empty() ? (output.has_parent_path() ? output.parent_path() : std::filesystem::path(".")) : options.temp_dir;
  std::filesystem::create_directories(temp_dir);

  SortStats stats;
  std::vector<std::filesystem::path> run_files;
  std::error_code size_error;
  const auto input_bytes = std::filesystem::file_size(input.path, size_error);
  RunBuffer buffer(options.buffer_bytes, size_error ? 0 : input_bytes, size_error ? 0 : input.records);

  auto flush_run = [&](bool final_run) {
    if (buffer.empty()) return;
    buffer.sort();
    std::filesystem::path path;
    if (final_run && run_files.empty()) {
      path = output;
    } else {
      path = temp_dir / (output.filename().string() + ".run" + std::to_string(run_files.size()));
      run_files.push_back(path);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    buffer.write(out, path);
    out.flush();
    if (!out) throw std::runtime_error("write failed on " + path.string() + " (disk full?)");
    buffer.clear();
    ++stats.runs;
  };

  {
    std::ifstream in(input.path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + input.path.string());
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::optional<CooRecord> rec;
      try {
        rec = parse_coo_line(line, input.dims);
      } catch (const std::invalid_argument& e) {
        throw ParseError(input.path, line_no, e.what());
      }
      if (!rec) continue;
      if (!buffer.fits(line.size())) flush_run(false);
      buffer.add(key_of(*rec, key_modes), line);
      ++stats.records;
    }
    if (in.bad()) throw std::runtime_error("read error on " + input.path.string());
  }
  flush_run(true);

  if (stats.records == 0) {
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + output.string());
    return stats;
  }
  if (run_files.empty()) return stats;

  // k-way merge; ties go to the lower run, which holds the earlier input lines.
  std::vector<std::unique_ptr<RunReader>> readers;
  auto advance = [&](RunReader& r) {
    if (!std::getline(r.in, r.line)) return false;
    auto rec = parse_coo_line(r.line, input.dims);
    r.key = key_of(*rec, key_modes);
    return true;
  };
  auto greater = [&](std::size_t a, std::size_t b) {
    const auto& ra = *readers[a];
    const auto& rb = *readers[b];
    if (ra.key != rb.key) return ra.key > rb.key;
    return ra.run > rb.run;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
  for (std::size_t i = 0; i < run_files.size(); ++i) {
    auto r = std::make_unique<RunReader>();
    r->in.open(run_files[i], std::ios::binary);
    if (!r->in) throw std::runtime_error("cannot reopen run " + run_files[i].string());
    r->run = i;
    readers.push_back(std::move(r));
    if (advance(*readers.back())) heap.push(i);
  }

  std::ofstream out(output, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + output.string());
  while (!heap.empty()) {
    const std::size_t i = heap.top();
    heap.pop();
    auto& r = *readers[i];
    write_checked(out, r.line.data(), r.line.size(), output);
    write_checked(out, "\n", 1, output);
    if (advance(r)) heap.push(i);
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed on " + output.string() + " (disk full?)");
  readers.clear();
  for (const auto& p : run_files) std::filesystem::remove(p);
  return stats;
}

}  // namespace tucker
