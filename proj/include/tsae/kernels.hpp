// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "tsae/tensor.hpp"

// Data-parallel inner loops. Every kernel exists twice: `serial` is a plain
// loop reference used by tests and the benchmark, `parallel` shards rows
// across OpenMP threads. Reductions use fixed-size row shards summed in
// shard order, so parallel results do not depend on the thread count.
namespace tsae::kernels {

using ConstRef = Eigen::Ref<const Matrix, 0, Eigen::OuterStride<>>;

/// Rows per reduction shard.
inline constexpr std::size_t kShardRows = 256;

/// Centered first and second moments of paired row sets x [n x p], y [n x r].
struct Moments {
  std::size_t count = 0;
  Vector mean_x;
  Vector mean_y;
  Matrix sxx;  // sum (x - mean_x)(x - mean_x)^T, [p x p]
  Matrix sxy;  // sum (x - mean_x)(y - mean_y)^T, [p x r]
};

/// Per-block squared-error and centered-energy sums for metric computation.
struct ErrorSums {
  Vector sse;     // per block: sum_q ||a - a_rec||^2
  Vector sst;     // per block: sum_q ||a - block mean||^2
  double sst_global = 0.0;  // sum_{q,i} ||a - global mean||^2
};

namespace serial {

Vector column_means(ConstRef x);
Moments centered_moments(ConstRef x, ConstRef y);
/// out = x * w^T + b^T (one affine map per row).
Matrix affine_rows(ConstRef x, const Matrix& w, const Vector& b);
/// out = a^T * b, summed over rows.
Matrix cross_rows(ConstRef a, ConstRef b);
ErrorSums error_sums(const Tensor3& a, const Tensor3& a_rec);

}  // namespace serial

namespace parallel {

Vector column_means(ConstRef x);
Moments centered_moments(ConstRef x, ConstRef y);
Matrix affine_rows(ConstRef x, const Matrix& w, const Vector& b);
Matrix cross_rows(ConstRef a, ConstRef b);
ErrorSums error_sums(const Tensor3& a, const Tensor3& a_rec);

}  // namespace parallel

/// Sets the OpenMP thread count (no-op without OpenMP); 0 keeps the default.
void set_threads(int threads);
int max_threads();

}  // namespace tsae::kernels
