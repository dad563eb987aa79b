// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/kernels.hpp"

namespace tsae::kernels::serial {

Vector column_means(ConstRef x) {
  Vector mean = Vector::Zero(x.cols());
  for (Eigen::Index q = 0; q < x.rows(); ++q)
    for (Eigen::Index c = 0; c < x.cols(); ++c) mean(c) += x(q, c);
  if (x.rows() > 0) mean /= static_cast<double>(x.rows());
  return mean;
}

Moments centered_moments(ConstRef x, ConstRef y) {
  Moments m;
  m.count = static_cast<std::size_t>(x.rows());
  m.mean_x = column_means(x);
  m.mean_y = column_means(y);
  const auto p = x.cols();
  const auto r = y.cols();
  m.sxx = Matrix::Zero(p, p);
  m.sxy = Matrix::Zero(p, r);
  std::vector<double> xc(p), yc(r);
  for (Eigen::Index q = 0; q < x.rows(); ++q) {
    for (Eigen::Index a = 0; a < p; ++a) xc[a] = x(q, a) - m.mean_x(a);
    for (Eigen::Index b = 0; b < r; ++b) yc[b] = y(q, b) - m.mean_y(b);
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index b = 0; b < p; ++b) m.sxx(a, b) += xc[a] * xc[b];
      for (Eigen::Index b = 0; b < r; ++b) m.sxy(a, b) += xc[a] * yc[b];
    }
  }
  return m;
}

Matrix affine_rows(ConstRef x, const Matrix& w, const Vector& b) {
  Matrix out(x.rows(), w.rows());
  for (Eigen::Index q = 0; q < x.rows(); ++q) {
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double acc = b(o);
      for (Eigen::Index c = 0; c < x.cols(); ++c) acc += w(o, c) * x(q, c);
      out(q, o) = acc;
    }
  }
  return out;
}

Matrix cross_rows(ConstRef a, ConstRef b) {
  Matrix out = Matrix::Zero(a.cols(), b.cols());
  for (Eigen::Index q = 0; q < a.rows(); ++q)
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      const double ai = a(q, i);
      if (ai == 0.0) continue;
      for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += ai * b(q, j);
    }
  return out;
}

ErrorSums error_sums(const Tensor3& a, const Tensor3& a_rec) {
  const auto n = a.rows(), t = a.blocks(), d = a.width();
  ErrorSums s;
  s.sse = Vector::Zero(static_cast<Eigen::Index>(t));
  s.sst = Vector::Zero(static_cast<Eigen::Index>(t));
  std::vector<double> block_mean(t * d, 0.0), global_mean(d, 0.0);
  for (std::size_t q = 0; q < n; ++q)
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        block_mean[i * d + c] += a.at(q, i, c);
        global_mean[c] += a.at(q, i, c);
      }
  for (auto& v : block_mean) v /= static_cast<double>(n);
  for (auto& v : global_mean) v /= static_cast<double>(n * t);
  for (std::size_t q = 0; q < n; ++q)
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        const double v = a.at(q, i, c);
        const double e = v - a_rec.at(q, i, c);
        const double dm = v - block_mean[i * d + c];
        const double dg = v - global_mean[c];
        s.sse(i) += e * e;
        s.sst(i) += dm * dm;
        s.sst_global += dg * dg;
      }
  return s;
}

}  // namespace tsae::kernels::serial
