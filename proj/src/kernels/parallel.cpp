// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tsae::kernels {

namespace {

std::size_t shard_count(std::size_t rows) { return (rows + kShardRows - 1) / kShardRows; }

template <class Body>
void for_each_shard(std::size_t rows, Body&& body) {
  const auto shards = static_cast<std::ptrdiff_t>(shard_count(rows));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < shards; ++s) {
    const auto begin = static_cast<std::size_t>(s) * kShardRows;
    const auto end = std::min(rows, begin + kShardRows);
    body(static_cast<std::size_t>(s), static_cast<Eigen::Index>(begin),
         static_cast<Eigen::Index>(end - begin));
  }
}

}  // namespace

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

Vector column_means(ConstRef x) {
  const auto rows = static_cast<std::size_t>(x.rows());
  std::vector<Vector> partial(shard_count(rows));
  for_each_shard(rows, [&](std::size_t s, Eigen::Index b, Eigen::Index n) {
    partial[s] = x.middleRows(b, n).colwise().sum().transpose();
  });
  Vector mean = Vector::Zero(x.cols());
  for (const auto& p : partial) mean += p;
  if (rows > 0) mean /= static_cast<double>(rows);
  return mean;
}

Moments centered_moments(ConstRef x, ConstRef y) {
  Moments m;
  m.count = static_cast<std::size_t>(x.rows());
  m.mean_x = column_means(x);
  m.mean_y = column_means(y);
  const auto shards = shard_count(m.count);
  std::vector<Matrix> pxx(shards), pxy(shards);
  for_each_shard(m.count, [&](std::size_t s, Eigen::Index b, Eigen::Index n) {
    const Matrix xc = x.middleRows(b, n).rowwise() - m.mean_x.transpose();
    const Matrix yc = y.middleRows(b, n).rowwise() - m.mean_y.transpose();
    pxx[s].noalias() = xc.transpose() * xc;
    pxy[s].noalias() = xc.transpose() * yc;
  });
  m.sxx = Matrix::Zero(x.cols(), x.cols());
  m.sxy = Matrix::Zero(x.cols(), y.cols());
  for (std::size_t s = 0; s < shards; ++s) {
    m.sxx += pxx[s];
    m.sxy += pxy[s];
  }
  return m;
}

Matrix affine_rows(ConstRef x, const Matrix& w, const Vector& b) {
  Matrix out(x.rows(), w.rows());
  for_each_shard(static_cast<std::size_t>(x.rows()),
                 [&](std::size_t, Eigen::Index begin, Eigen::Index n) {
                   out.middleRows(begin, n).noalias() = x.middleRows(begin, n) * w.transpose();
                   out.middleRows(begin, n).rowwise() += b.transpose();
                 });
  return out;
}

Matrix cross_rows(ConstRef a, ConstRef b) {
  const auto rows = static_cast<std::size_t>(a.rows());
  std::vector<Matrix> partial(shard_count(rows));
  for_each_shard(rows, [&](std::size_t s, Eigen::Index begin, Eigen::Index n) {
    partial[s].noalias() = a.middleRows(begin, n).transpose() * b.middleRows(begin, n);
  });
  Matrix out = Matrix::Zero(a.cols(), b.cols());
  for (const auto& p : partial) out += p;
  return out;
}

ErrorSums error_sums(const Tensor3& a, const Tensor3& a_rec) {
  const auto n = a.rows(), t = a.blocks();
  const auto flat = a.flat();
  const Vector block_mean = column_means(flat);  // [t*d]
  const auto d = static_cast<Eigen::Index>(a.width());
  Vector global_mean = Vector::Zero(d);
  for (std::size_t i = 0; i < t; ++i)
    global_mean += block_mean.segment(static_cast<Eigen::Index>(i) * d, d);
  global_mean /= static_cast<double>(t);

  struct Partial {
    Vector sse, sst;
    double sst_global = 0.0;
  };
  std::vector<Partial> partial(shard_count(n));
  const auto rec = a_rec.flat();
  for_each_shard(n, [&](std::size_t s, Eigen::Index b, Eigen::Index rows) {
    Partial p;
    p.sse = Vector::Zero(static_cast<Eigen::Index>(t));
    p.sst = Vector::Zero(static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < t; ++i) {
      const auto off = static_cast<Eigen::Index>(i) * d;
      const auto blk = flat.block(b, off, rows, d);
      p.sse(static_cast<Eigen::Index>(i)) = (blk - rec.block(b, off, rows, d)).squaredNorm();
      p.sst(static_cast<Eigen::Index>(i)) =
          (blk.rowwise() - block_mean.segment(off, d).transpose()).squaredNorm();
      p.sst_global += (blk.rowwise() - global_mean.transpose()).squaredNorm();
    }
    partial[s] = std::move(p);
  });
  ErrorSums out;
  out.sse = Vector::Zero(static_cast<Eigen::Index>(t));
  out.sst = Vector::Zero(static_cast<Eigen::Index>(t));
  for (const auto& p : partial) {
    out.sse += p.sse;
    out.sst += p.sst;
    out.sst_global += p.sst_global;
  }
  return out;
}

}  // namespace parallel
}  // namespace tsae::kernels
