#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajan/errors.hpp"

namespace trajan {

using Bytes = std::vector<std::uint8_t>;

static_assert(std::endian::native == std::endian::little,
              "wire and file encodings assume a little-endian host");

// Appends little-endian scalars to a growing buffer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes& out) : out_(&out) {}

  void u8(std::uint8_t v) { buf().push_back(v); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void raw(const void* data, std::size_t n) {
    if (n == 0) return;
    auto& b = buf();
    const auto at = b.size();
    b.resize(at + n);
    std::memcpy(b.data() + at, data, n);
  }
  void bytes(std::span<const std::uint8_t> b) { raw(b.data(), b.size()); }

  // u32 length followed by the bytes.
  void blob(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    bytes(b);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  Bytes take() { return std::move(own_); }
  std::size_t size() const { return out_ ? out_->size() : own_.size(); }

 private:
  Bytes& buf() { return out_ ? *out_ : own_; }

  Bytes own_;
  Bytes* out_ = nullptr;
};

// Bounds-checked little-endian reader. Every short read raises FormatError,
// so decoders built on it never touch memory past the end of the input.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  float f32() { return scalar<float>(); }
  double f64() { return scalar<double>(); }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> blob() { return bytes(u32()); }
  std::string str() {
    auto b = blob();
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
  }
  std::span<const std::uint8_t> rest() { return bytes(remaining()); }

  // Validates that `count` items of `item_size` bytes can still be read, so
  // a corrupted count cannot trigger a huge allocation.
  void expect_items(std::uint64_t count, std::size_t item_size) const {
    if (item_size != 0 && count > remaining() / item_size) {
      throw FormatError("declared " + std::to_string(count) + " items of " +
                        std::to_string(item_size) + " bytes but only " +
                        std::to_string(remaining()) + " bytes remain");
    }
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

  void expect_done() const {
    if (!done()) {
      throw FormatError(std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) {
      throw FormatError("short buffer: need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", have " +
                        std::to_string(remaining()));
    }
  }

  template <typename T>
  T scalar() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace trajan
