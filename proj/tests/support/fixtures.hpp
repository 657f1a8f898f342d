#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "oracles.hpp"
#include "tucker/slice_store.hpp"

namespace fixture {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tucker-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline tucker::StoreBuildOptions small_build(tucker::Index slab_size = 3) {
  tucker::StoreBuildOptions o;
  o.slab_size = slab_size;
  o.sort.buffer_bytes = tucker::min_sort_buffer_bytes;
  return o;
}

// Writes x as shuffled COO text and builds the requested stores from it.
inline tucker::SliceStoreSet stores_for(const tucker::Tensor& x, const std::vector<std::vector<std::size_t>>& sets,
                                        const TempDir& dir, tucker::Index slab_size = 3) {
  const auto coo = oracle::write_coo(x, dir / "x.coo", 99);
  return tucker::prepare_slice_stores(coo, sets, dir / "stores", small_build(slab_size));
}

inline tucker::SliceStoreSet all_stores_for(const tucker::Tensor& x, const TempDir& dir, tucker::Index slab_size = 3) {
  return stores_for(x, tucker::all_fixed_mode_sets(x.order()), dir, slab_size);
}

}  // namespace fixture
