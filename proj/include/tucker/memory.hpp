#pragma once

// Byte accounting for the buffers that dominate the footprint of a run:
// tensor values, in-RAM sparse records, slice arrays, sort runs and Gram
// accumulators. Counters are per thread, so independent runs on separate
// threads never see each other's allocations.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <new>
#include <vector>

namespace tucker::memory {

struct Counters {
  std::int64_t current = 0;
  std::int64_t peak = 0;
};

inline Counters& counters() {
  thread_local Counters c;
  return c;
}

inline void charge(std::size_t bytes) {
  auto& c = counters();
  c.current += static_cast<std::int64_t>(bytes);
  c.peak = std::max(c.peak, c.current);
}

inline void release(std::size_t bytes) {
  auto& c = counters();
  c.current -= static_cast<std::int64_t>(bytes);
}

inline std::int64_t current_bytes() { return counters().current; }

/// Records the high-water mark of tracked bytes allocated while it is alive,
/// relative to the tracked bytes live at construction. Scopes nest: the outer
/// scope still sees the inner peak.
class PeakScope {
 public:
  PeakScope() : baseline_(counters().current), outer_peak_(counters().peak) {
    counters().peak = baseline_;
  }
  ~PeakScope() {
    auto& c = counters();
    c.peak = std::max(c.peak, outer_peak_);
  }
  PeakScope(const PeakScope&) = delete;
  PeakScope& operator=(const PeakScope&) = delete;

  std::size_t peak_bytes() const {
    return static_cast<std::size_t>(std::max<std::int64_t>(0, counters().peak - baseline_));
  }

 private:
  std::int64_t baseline_;
  std::int64_t outer_peak_;
};

/// Charges a fixed byte count for its lifetime; used for buffers whose storage
/// is owned by a third-party container (Eigen matrices).
class Reservation {
 public:
  Reservation() = default;
  explicit Reservation(std::size_t bytes) : bytes_(bytes) { charge(bytes_); }
  ~Reservation() { release(bytes_); }
  Reservation(Reservation&& other) noexcept : bytes_(other.bytes_) { other.bytes_ = 0; }
  Reservation& operator=(Reservation&& other) noexcept {
    if (this != &other) {
      release(bytes_);
      bytes_ = other.bytes_;
      other.bytes_ = 0;
    }
    return *this;
  }
  Reservation(const Reservation&) = delete;
  Reservation& operator=(const Reservation&) = delete;

  std::size_t bytes() const { return bytes_; }

 private:
  std::size_t bytes_ = 0;
};

template <typename T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() noexcept = default;
  template <typename U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
    T* p = static_cast<T*>(::operator new(n * sizeof(T)));
    charge(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    release(n * sizeof(T));
    ::operator delete(p);
  }

  template <typename U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using tracked_vector = std::vector<T, TrackedAllocator<T>>;

}  // namespace tucker::memory
