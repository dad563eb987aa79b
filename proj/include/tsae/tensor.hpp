// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tsae {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using MatrixMap = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
using ConstMatrixMap = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

/// Dense [rows x blocks x width] tensor stored row-major: row (trajectory)
/// outermost, then block (timestep), then channel. A row's blocks are
/// contiguous, so the concatenated view [rows x blocks*width] is free.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t rows, std::size_t blocks, std::size_t width)
      : rows_(rows), blocks_(blocks), width_(width), data_(rows * blocks * width, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t blocks() const noexcept { return blocks_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t row_size() const noexcept { return blocks_ * width_; }
  bool empty() const noexcept { return data_.empty(); }

  double& at(std::size_t q, std::size_t i, std::size_t c) {
    return data_[(q * blocks_ + i) * width_ + c];
  }
  double at(std::size_t q, std::size_t i, std::size_t c) const {
    return data_[(q * blocks_ + i) * width_ + c];
  }

  std::span<double> vec(std::size_t q, std::size_t i) {
    return {data_.data() + (q * blocks_ + i) * width_, width_};
  }
  std::span<const double> vec(std::size_t q, std::size_t i) const {
    return {data_.data() + (q * blocks_ + i) * width_, width_};
  }

  /// Block i for every row: a strided [rows x width] view.
  MatrixMap block(std::size_t i) {
    return {data_.data() + i * width_, static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(width_), Eigen::OuterStride<>(row_size())};
  }
  ConstMatrixMap block(std::size_t i) const {
    return {data_.data() + i * width_, static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(width_), Eigen::OuterStride<>(row_size())};
  }

  /// All blocks concatenated per row: [rows x blocks*width].
  MatrixMap flat() {
    return {data_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(row_size()), Eigen::OuterStride<>(row_size())};
  }
  ConstMatrixMap flat() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_),
            static_cast<Eigen::Index>(row_size()), Eigen::OuterStride<>(row_size())};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Tensor3& o) const noexcept {
    return rows_ == o.rows_ && blocks_ == o.blocks_ && width_ == o.width_;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t blocks_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Copies the selected rows, in order.
Tensor3 select_rows(const Tensor3& t, std::span<const std::size_t> rows);

}  // namespace tsae
