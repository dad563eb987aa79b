// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "tsae/binary_io.hpp"
#include "tsae/error.hpp"
#include "tsae/hash.hpp"
#include "tsae/tensor.hpp"

namespace tsae {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::truncated: return "truncated";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::singular: return "singular";
    case Errc::divergence: return "divergence";
    case Errc::missing_input: return "missing_input";
    case Errc::hash_mismatch: return "hash_mismatch";
    case Errc::config: return "config";
    case Errc::infeasible: return "infeasible";
  }
  return "unknown";
}

Tensor3 select_rows(const Tensor3& t, std::span<const std::size_t> rows) {
  Tensor3 out(rows.size(), t.blocks(), t.width());
  const auto rs = t.row_size();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    require(rows[k] < t.rows(), Errc::invalid_argument, "select_rows: row index out of range");
    std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(rows[k] * rs), rs,
                out.data().begin() + static_cast<std::ptrdiff_t>(k * rs));
  }
  return out;
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(Errc::io, "sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

std::string sha256_hex(std::string_view text) { return sha256_hex(text.data(), text.size()); }

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

std::string sha256_file(const std::string& path) { return sha256_hex(io::read_file(path)); }

namespace io {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_input, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, "write failed: " + path);
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(Errc::io, "write failed: " + path);
}

}  // namespace io
}  // namespace tsae
