// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tsae {

/// Lowercase hex SHA-256.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(std::string_view text);
std::string sha256_hex(const std::vector<unsigned char>& bytes);
std::string sha256_file(const std::string& path);

}  // namespace tsae
