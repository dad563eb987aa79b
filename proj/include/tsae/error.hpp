// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tsae {

/// Error classes. The CLI maps each one to its own exit code.
enum class Errc {
  invalid_argument = 2,
  io = 3,
  bad_magic = 4,
  truncated = 5,
  version_mismatch = 6,
  shape_mismatch = 7,
  singular = 8,
  divergence = 9,
  missing_input = 10,
  hash_mismatch = 11,
  config = 12,
  infeasible = 13,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace tsae
