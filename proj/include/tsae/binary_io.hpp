// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "tsae/error.hpp"

namespace tsae::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// Append-only little-endian byte sink.
class Writer {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

/// Bounds-checked reader; running past the end raises Errc::truncated.
class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0) {
      fail(Errc::bad_magic, context_ + ": bad magic, expected \"" + std::string(m) + "\"");
    }
    pos_ += m.size();
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  float f32() { return pod<float>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  template <class T>
  T pod() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(Errc::truncated, context_ + ": truncated payload");
  }

  const std::vector<unsigned char>& bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& bytes);
void write_text(const std::string& path, std::string_view text);

}  // namespace tsae::io
