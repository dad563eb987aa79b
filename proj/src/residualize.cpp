// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/residualize.hpp"

#include <cmath>

#include "tsae/binary_io.hpp"
#include "tsae/error.hpp"

namespace tsae {

TimestepNormalizer fit_normalizer(const Tensor3& train) {
  require(train.rows() >= 2, Errc::invalid_argument, "fit_normalizer: need at least 2 trajectories");
  const auto t = static_cast<Eigen::Index>(train.blocks());
  const auto d = static_cast<Eigen::Index>(train.width());
  const auto flat = train.flat();
  const Vector mean = kernels::parallel::column_means(flat);
  // Second pass on centered values for numerical stability.
  Vector var = Vector::Zero(t * d);
  for (std::size_t q = 0; q < train.rows(); ++q) {
    var += (flat.row(static_cast<Eigen::Index>(q)).transpose() - mean).array().square().matrix();
  }
  var /= static_cast<double>(train.rows());
  TimestepNormalizer norm;
  norm.mu = Eigen::Map<const Matrix>(mean.data(), t, d);
  norm.sigma = Eigen::Map<const Matrix>(var.data(), t, d).cwiseSqrt().cwiseMax(kSigmaFloor);
  return norm;
}

namespace {

void check_norm_shape(const TimestepNormalizer& norm, const Tensor3& x) {
  require(norm.blocks() == x.blocks() && norm.width() == x.width(), Errc::shape_mismatch,
          "normalizer shape [" + std::to_string(norm.blocks()) + " x " +
              std::to_string(norm.width()) + "] does not match data [" +
              std::to_string(x.blocks()) + " x " + std::to_string(x.width()) + "]");
}

}  // namespace

Tensor3 apply_norm(const TimestepNormalizer& norm, const Tensor3& x) {
  check_norm_shape(norm, x);
  Tensor3 out(x.rows(), x.blocks(), x.width());
  for (std::size_t i = 0; i < x.blocks(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.block(i) = (x.block(i).rowwise() - norm.mu.row(row)).array().rowwise() /
                   norm.sigma.row(row).array();
  }
  return out;
}

Tensor3 invert_norm(const TimestepNormalizer& norm, const Tensor3& x) {
  check_norm_shape(norm, x);
  Tensor3 out(x.rows(), x.blocks(), x.width());
  for (std::size_t i = 0; i < x.blocks(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out.block(i) = (x.block(i).array().rowwise() * norm.sigma.row(row).array()).matrix().rowwise() +
                   norm.mu.row(row);
  }
  return out;
}

RidgeChain fit_ridge(const Tensor3& train_normalized, double lambda) {
  require(lambda >= 0.0 && std::isfinite(lambda), Errc::invalid_argument,
          "fit_ridge: lambda must be finite and >= 0");
  require(train_normalized.blocks() >= 2, Errc::invalid_argument, "fit_ridge: need T >= 2");
  require(train_normalized.rows() >= 1, Errc::invalid_argument, "fit_ridge: empty data");
  RidgeChain chain;
  chain.lambda = lambda;
  for (std::size_t i = 1; i < train_normalized.blocks(); ++i) {
    const auto m = kernels::parallel::centered_moments(train_normalized.block(i - 1),
                                                       train_normalized.block(i));
    Matrix gram = m.sxx;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(gram);
    const bool ok = llt.info() == Eigen::Success && llt.rcond() > 1e-13;
    require(ok, Errc::singular,
            "fit_ridge: S_xx + lambda*I is singular for transition " + std::to_string(i) +
                " (rank-deficient data); use lambda > 0");
    // W^T = (S_xx + lambda I)^{-1} S_xy
    Matrix w = llt.solve(m.sxy).transpose();
    Vector b = m.mean_y - w * m.mean_x;
    require(w.allFinite() && b.allFinite(), Errc::singular,
            "fit_ridge: non-finite solution; use lambda > 0");
    chain.weight.push_back(std::move(w));
    chain.bias.push_back(std::move(b));
  }
  return chain;
}

namespace {

void check_chain_shape(const RidgeChain& chain, std::size_t blocks, std::size_t width) {
  require(chain.timesteps() == blocks && chain.width() == width, Errc::shape_mismatch,
          "ridge chain (T=" + std::to_string(chain.timesteps()) + ", d=" +
              std::to_string(chain.width()) + ") does not match data (T=" +
              std::to_string(blocks) + ", d=" + std::to_string(width) + ")");
}

}  // namespace

Matrix predict_block(const RidgeChain& chain, std::size_t to, kernels::ConstRef prev) {
  require(to >= 1 && to < chain.timesteps(), Errc::invalid_argument,
          "predict_block: transition index out of range");
  return kernels::parallel::affine_rows(prev, chain.weight[to - 1], chain.bias[to - 1]);
}

Tensor3 residualize(const Tensor3& normalized, const RidgeChain& chain) {
  check_chain_shape(chain, normalized.blocks(), normalized.width());
  Tensor3 out(normalized.rows(), normalized.blocks() - 1, normalized.width());
  for (std::size_t i = 1; i < normalized.blocks(); ++i) {
    out.block(i - 1) = normalized.block(i) - predict_block(chain, i, normalized.block(i - 1));
  }
  return out;
}

Tensor3 recompose(const Tensor3& teacher, const Tensor3& residuals, const RidgeChain& chain,
                  ConstMatrixMap first) {
  check_chain_shape(chain, teacher.blocks(), teacher.width());
  const std::size_t t = teacher.blocks();
  require(residuals.rows() == teacher.rows() && residuals.width() == teacher.width() &&
              (residuals.blocks() == t || residuals.blocks() == t - 1),
          Errc::shape_mismatch, "recompose: residual tensor shape mismatch");
  require(static_cast<std::size_t>(first.rows()) == teacher.rows() &&
              static_cast<std::size_t>(first.cols()) == teacher.width(),
          Errc::shape_mismatch, "recompose: first block shape mismatch");
  const std::size_t shift = residuals.blocks() == t ? 0 : 1;
  Tensor3 out(teacher.rows(), t, teacher.width());
  out.block(0) = first;
  for (std::size_t i = 1; i < t; ++i) {
    out.block(i) = predict_block(chain, i, teacher.block(i - 1)) + residuals.block(i - shift);
  }
  return out;
}

Tensor3 build_components(const Tensor3& normalized, const RidgeChain* chain, SaeInputSpec spec) {
  if (!spec.residualized) return normalized;
  require(chain != nullptr, Errc::invalid_argument,
          "build_sae_input: residualized input requires a ridge chain");
  const Tensor3 r = residualize(normalized, *chain);
  Tensor3 z(normalized.rows(), normalized.blocks(), normalized.width());
  z.block(0) = normalized.block(0);
  for (std::size_t i = 1; i < normalized.blocks(); ++i) z.block(i) = r.block(i - 1);
  return z;
}

SaeInput build_sae_input(const Tensor3& normalized, const RidgeChain* chain, SaeInputSpec spec) {
  Tensor3 z = build_components(normalized, chain, spec);
  SaeInput out;
  out.component = fit_normalizer(z);
  out.x = apply_norm(out.component, z);
  return out;
}

Tensor3 build_sae_input(const Tensor3& normalized, const RidgeChain* chain, SaeInputSpec spec,
                        const TimestepNormalizer& component) {
  const Tensor3 z = build_components(normalized, chain, spec);
  require(component.blocks() == z.blocks() && component.width() == z.width(), Errc::shape_mismatch,
          "build_sae_input: component normalizer was fitted on a different shape");
  return apply_norm(component, z);
}

std::vector<std::optional<double>> ridge_ev_diagnostic(const Tensor3& normalized,
                                                       const RidgeChain& chain) {
  check_chain_shape(chain, normalized.blocks(), normalized.width());
  std::vector<std::optional<double>> ev;
  for (std::size_t i = 1; i < normalized.blocks(); ++i) {
    const auto target = normalized.block(i);
    const Matrix pred = predict_block(chain, i, normalized.block(i - 1));
    const double sse = (target - pred).squaredNorm();
    const RowVector mean = target.colwise().mean();
    const double sst = (target.rowwise() - mean).squaredNorm();
    if (sst > 0.0) {
      ev.emplace_back(1.0 - sse / sst);
    } else {
      ev.emplace_back(std::nullopt);
    }
  }
  return ev;
}

// --- .ridge --------------------------------------------------------------------

namespace {

void write_matrix(io::Writer& w, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
}

Matrix read_matrix(io::Reader& r, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.f64();
  return m;
}

}  // namespace

std::vector<unsigned char> encode_ridge(const RidgeArtifact& a) {
  const auto t = a.normalizer.blocks(), d = a.normalizer.width();
  require(a.chain.timesteps() == t && a.chain.width() == d, Errc::shape_mismatch,
          "ridge artifact: chain and normalizer disagree");
  io::Writer w;
  w.magic("TSRG");
  w.u32(kRidgeVersion);
  w.u32(static_cast<std::uint32_t>(t));
  w.u32(static_cast<std::uint32_t>(d));
  w.f64(a.chain.lambda);
  w.str(a.source_hash);
  write_matrix(w, a.normalizer.mu);
  write_matrix(w, a.normalizer.sigma);
  for (std::size_t i = 0; i < a.chain.transitions(); ++i) {
    write_matrix(w, a.chain.weight[i]);
    for (double v : a.chain.bias[i]) w.f64(v);
  }
  return w.bytes();
}

RidgeArtifact decode_ridge(const std::vector<unsigned char>& bytes, const std::string& context) {
  io::Reader r(bytes, context);
  r.expect_magic("TSRG");
  const auto version = r.u32();
  require(version == kRidgeVersion, Errc::version_mismatch,
          context + ": unsupported ridge version " + std::to_string(version));
  const auto t = static_cast<Eigen::Index>(r.u32());
  const auto d = static_cast<Eigen::Index>(r.u32());
  RidgeArtifact a;
  a.chain.lambda = r.f64();
  a.source_hash = r.str();
  a.normalizer.mu = read_matrix(r, t, d);
  a.normalizer.sigma = read_matrix(r, t, d);
  for (Eigen::Index i = 1; i < t; ++i) {
    a.chain.weight.push_back(read_matrix(r, d, d));
    Vector b(d);
    for (auto& v : b) v = r.f64();
    a.chain.bias.push_back(std::move(b));
  }
  return a;
}

void save_ridge(const RidgeArtifact& artifact, const std::string& path) {
  io::write_file(path, encode_ridge(artifact));
}

RidgeArtifact load_ridge(const std::string& path) { return decode_ridge(io::read_file(path), path); }

}  // namespace tsae
