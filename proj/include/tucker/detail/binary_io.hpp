#pragma once

// Little-endian fixed-width encoding with a running CRC-32 (zlib polynomial).

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

#include <zlib.h>

namespace tucker::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

class Crc32 {
 public:
  void update(const void* data, std::size_t n) {
    value_ = ::crc32(value_, static_cast<const Bytef*>(data), static_cast<uInt>(n));
  }
  std::uint32_t value() const { return static_cast<std::uint32_t>(value_); }

 private:
  uLong value_ = ::crc32(0L, Z_NULL, 0);
};

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void raw(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    crc_.update(data, n);
    bytes_ += n;
  }
  void u32(std::uint32_t v) {
    v = to_little(v);
    raw(&v, sizeof v);
  }
  void u64(std::uint64_t v) {
    v = to_little(v);
    raw(&v, sizeof v);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  template <typename T>
  void u64_array(std::span<const T> values) {
    for (T v : values) u64(static_cast<std::uint64_t>(v));
  }
  void f64_array(std::span<const double> values) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(values.data(), values.size_bytes());
    } else {
      for (double v : values) f64(v);
    }
  }
  /// Appends the CRC of everything written so far (not itself checksummed).
  void checksum() {
    std::uint32_t c = to_little(crc_.value());
    out_.write(reinterpret_cast<const char*>(&c), sizeof c);
    bytes_ += sizeof c;
  }
  std::uint64_t bytes() const { return bytes_; }
  bool good() const { return out_.good(); }

 private:
  std::ostream& out_;
  Crc32 crc_;
  std::uint64_t bytes_ = 0;
};

class LeReader {
 public:
  LeReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void raw(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw std::runtime_error(what_ + ": truncated");
    crc_.update(data, n);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return to_little(v);
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return to_little(v);
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  template <typename T>
  void u64_array(std::span<T> out) {
    for (auto& v : out) v = static_cast<T>(u64());
  }
  void f64_array(std::span<double> out) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(out.data(), out.size_bytes());
    } else {
      for (auto& v : out) v = f64();
    }
  }
  void magic(const char (&expected)[5]) {
    char m[4];
    raw(m, 4);
    if (std::memcmp(m, expected, 4) != 0) throw std::runtime_error(what_ + ": bad magic");
  }
  void verify_checksum() {
    const std::uint32_t expected = crc_.value();
    std::uint32_t stored;
    in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (in_.gcount() != sizeof stored) throw std::runtime_error(what_ + ": truncated checksum");
    if (to_little(stored) != expected) throw std::runtime_error(what_ + ": checksum mismatch");
  }

 private:
  std::istream& in_;
  std::string what_;
  Crc32 crc_;
};

}  // namespace tucker::detail
