// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tsae/residualize.hpp"

using namespace tsae;

namespace {

Tensor3 two_block(const Matrix& x, const Matrix& y) {
  Tensor3 t(static_cast<std::size_t>(x.rows()), 2, static_cast<std::size_t>(x.cols()));
  t.block(0) = x;
  t.block(1) = y;
  return t;
}

}  // namespace

TEST(Normalizer, ConstantCoordinateIsFloored) {
  Tensor3 t(4, 2, 2);
  for (std::size_t q = 0; q < 4; ++q) {
    t.at(q, 0, 0) = 3.0;
    t.at(q, 0, 1) = static_cast<double>(q);
    t.at(q, 1, 0) = static_cast<double>(q * q);
    t.at(q, 1, 1) = -1.0;
  }
  const auto n = fit_normalizer(t);
  EXPECT_EQ(n.sigma(0, 0), kSigmaFloor);
  EXPECT_EQ(n.sigma(1, 1), kSigmaFloor);
  const auto z = apply_norm(n, t);
  for (std::size_t q = 0; q < 4; ++q) {
    EXPECT_EQ(z.at(q, 0, 0), 0.0);
    EXPECT_EQ(z.at(q, 1, 1), 0.0);
  }
}

TEST(Normalizer, TwoPointPopulationStats) {
  Tensor3 t(2, 2, 1);
  t.at(0, 0, 0) = -1.0;
  t.at(1, 0, 0) = 1.0;
  t.at(0, 1, 0) = 0.0;
  t.at(1, 1, 0) = 4.0;
  const auto n = fit_normalizer(t);
  EXPECT_DOUBLE_EQ(n.mu(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(n.sigma(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.mu(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(n.sigma(1, 0), 2.0);
}

TEST(Normalizer, RoundtripAndStandardization) {
  std::mt19937_64 rng(2);
  Tensor3 t = oracle::random_tensor(300, 3, 5, rng);
  for (auto& v : t.data()) v = 4.0 * v - 2.0;
  const auto n = fit_normalizer(t);
  const auto z = apply_norm(n, t);
  const auto back = invert_norm(n, z);
  for (std::size_t i = 0; i < t.data().size(); ++i) EXPECT_NEAR(back.data()[i], t.data()[i], 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    const Matrix b = z.block(i);
    const Eigen::RowVectorXd mean = b.colwise().mean();
    const Eigen::RowVectorXd var = (b.rowwise() - mean).array().square().colwise().mean();
    EXPECT_LE(mean.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((var.array().sqrt() - 1.0).abs().maxCoeff(), 1e-6);
  }
  EXPECT_ERRC(fit_normalizer(Tensor3(1, 2, 2)), Errc::invalid_argument);
  EXPECT_ERRC(apply_norm(n, Tensor3(4, 2, 5)), Errc::shape_mismatch);
}

TEST(Ridge, IdentityMapAtZeroLambda) {
  std::mt19937_64 rng(3);
  const Matrix x = oracle::random_matrix(50, 4, rng);
  const auto chain = fit_ridge(two_block(x, x), 0.0);
  EXPECT_LE((chain.weight[0] - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(chain.bias[0].cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Ridge, HandSolvedScalarCase) {
  Matrix x(3, 1), y(3, 1);
  x << 1, 2, 3;
  y << 3, 5, 7;
  const auto chain = fit_ridge(two_block(x, y), 0.1);
  EXPECT_NEAR(chain.weight[0](0, 0), 4.0 / 2.1, 1e-12);
  EXPECT_NEAR(chain.bias[0](0), 5.0 - 2.0 * 4.0 / 2.1, 1e-12);
  EXPECT_NEAR(chain.weight[0](0, 0), 1.90476, 1e-5);
  EXPECT_NEAR(chain.bias[0](0), 1.19048, 1e-5);
}

TEST(Ridge, SingularWithoutPenalty) {
  std::mt19937_64 rng(4);
  Matrix x = oracle::random_matrix(30, 3, rng);
  x.col(2) = x.col(0) + x.col(1);
  EXPECT_ERRC(fit_ridge(two_block(x, x), 0.0), Errc::singular);
  EXPECT_NO_THROW(fit_ridge(two_block(x, x), 0.1));
  EXPECT_ERRC(fit_ridge(two_block(x, x), -1.0), Errc::invalid_argument);
}

TEST(Ridge, StationaryForObjective) {
  std::mt19937_64 rng(5);
  const Matrix x = oracle::random_matrix(80, 5, rng);
  const Matrix y = x * oracle::random_matrix(5, 5, rng) + oracle::random_matrix(80, 5, rng, 0.5);
  const double lambda = 0.7;
  const auto c = fit_ridge(two_block(x, y), lambda);
  // d/dW sum ||y - W x - b||^2 + lambda ||W||^2 and d/db vanish.
  const Matrix r = y - ((x * c.weight[0].transpose()).rowwise() + c.bias[0].transpose());
  const Matrix gw = -2.0 * r.transpose() * x + 2.0 * lambda * c.weight[0];
  const Eigen::RowVectorXd gb = -2.0 * r.colwise().sum();
  EXPECT_LE(gw.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(gb.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ridge, MonotoneShrinkage) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = oracle::random_matrix(40, 6, rng);
    const Matrix y = oracle::random_matrix(40, 6, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.05, 0.1, 0.5, 1.0, 5.0, 50.0, 500.0}) {
      const double norm = fit_ridge(two_block(x, y), lambda).weight[0].norm();
      EXPECT_LE(norm, prev + 1e-15);
      prev = norm;
    }
  }
}

TEST(Ridge, MatchesIterativeOracle) {
  std::mt19937_64 rng(7);
  const Matrix x = oracle::random_matrix(200, 8, rng);
  const Matrix y = x * oracle::random_matrix(8, 8, rng, 0.3) + oracle::random_matrix(200, 8, rng, 0.2);
  for (double lambda : {0.0, 0.1, 1.0}) {
    const auto c = fit_ridge(two_block(x, y), lambda);
    const auto [w, b] = oracle::ridge_cg(x, y, lambda);
    EXPECT_LE((c.weight[0] - w).norm() / w.norm(), 1e-6);
  }
}

TEST(Residualize, NoiselessDynamicsLeaveNoResidual) {
  SyntheticSpec spec;
  spec.trajectories = 300;
  spec.timesteps = 4;
  spec.channels = 5;
  spec.seed = 3;
  const auto syn = generate_synthetic(spec);
  const auto norm = fit_normalizer(syn.dataset.data());
  const auto z = apply_norm(norm, syn.dataset.data());
  const auto r = residualize(z, fit_ridge(z, 0.0));
  EXPECT_EQ(r.blocks(), 3u);
  for (double v : r.data()) EXPECT_LE(std::abs(v), 1e-7);
}

TEST(Residualize, IdentityChainDifferences) {
  std::mt19937_64 rng(8);
  const auto z = oracle::random_tensor(10, 3, 2, rng);
  RidgeChain chain;
  for (int i = 0; i < 2; ++i) {
    chain.weight.push_back(Matrix::Identity(2, 2));
    chain.bias.push_back(Vector::Zero(2));
  }
  const auto r = residualize(z, chain);
  for (std::size_t q = 0; q < 10; ++q)
    for (std::size_t i = 1; i < 3; ++i)
      for (std::size_t c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(r.at(q, i - 1, c), z.at(q, i, c) - z.at(q, i - 1, c));
  EXPECT_ERRC(residualize(oracle::random_tensor(10, 4, 2, rng), chain), Errc::shape_mismatch);
}

TEST(Residualize, ResidualsCarryPlantedComponents) {
  SyntheticSpec spec;
  spec.trajectories = 4096;
  spec.timesteps = 4;
  spec.channels = 16;
  spec.residual_rank = 8;
  spec.residual_sparsity = 0.2;
  spec.noise_std = 0.05;
  spec.seed = 21;
  const auto syn = generate_synthetic(spec);
  const auto norm = fit_normalizer(syn.dataset.data());
  const auto z = apply_norm(norm, syn.dataset.data());
  const auto r = residualize(z, fit_ridge(z, kDefaultRidgeLambda));
  for (std::size_t i = 0; i < r.blocks(); ++i) {
    // Least-squares regression of the residual block on the planted coefficients.
    Eigen::MatrixXd design(r.rows(), spec.residual_rank + 1);
    for (std::size_t q = 0; q < r.rows(); ++q) {
      for (std::size_t j = 0; j < spec.residual_rank; ++j) design(q, j) = syn.truth.coefficients.at(q, i, j);
      design(q, spec.residual_rank) = 1.0;
    }
    const Eigen::MatrixXd target = Matrix(r.block(i));
    const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(target);
    const Eigen::MatrixXd fit = design * coef;
    const Eigen::RowVectorXd mu = target.colwise().mean();
    const double ev = 1.0 - (target - fit).squaredNorm() / (target.rowwise() - mu).squaredNorm();
    EXPECT_GE(ev, 0.9) << "transition " << i;
  }
}

TEST(Recompose, InvertsResidualization) {
  std::mt19937_64 rng(9);
  const auto z = oracle::random_tensor(50, 4, 3, rng);
  const auto chain = fit_ridge(z, 0.1);
  const auto r = residualize(z, chain);
  const auto back = recompose(z, r, chain, z.block(0));
  for (std::size_t i = 0; i < z.data().size(); ++i) EXPECT_NEAR(back.data()[i], z.data()[i], 1e-12);
}

TEST(SaeInput, DimensionsAndRawRoundtrip) {
  std::mt19937_64 rng(10);
  const auto z = oracle::random_tensor(40, 5, 16, rng);
  const auto chain = fit_ridge(z, 0.1);
  const auto in = build_sae_input(z, &chain, {true, true});
  EXPECT_EQ(in.x.flat().cols(), 80);
  const auto raw = build_sae_input(z, nullptr, {false, false});
  const auto back = invert_norm(raw.component, raw.x);
  for (std::size_t i = 0; i < z.data().size(); ++i) EXPECT_NEAR(back.data()[i], z.data()[i], 1e-10);
  // Block 0 is the normalized activation, later blocks the ridge residuals.
  const auto comps = build_components(z, &chain, {true, true});
  const auto r = residualize(z, chain);
  for (std::size_t q = 0; q < 40; ++q) {
    EXPECT_EQ(comps.at(q, 0, 3), z.at(q, 0, 3));
    EXPECT_EQ(comps.at(q, 2, 3), r.at(q, 1, 3));
  }
  EXPECT_ERRC(build_sae_input(z, nullptr, {true, true}), Errc::invalid_argument);
  EXPECT_ERRC(build_sae_input(oracle::random_tensor(4, 5, 8, rng), &chain, {true, true}, in.component),
              Errc::shape_mismatch);
}

TEST(RidgeEv, Fixtures) {
  std::mt19937_64 rng(11);
  const Matrix x = oracle::random_matrix(100, 3, rng);
  const Matrix a = oracle::random_matrix(3, 3, rng);
  const Tensor3 perfect = two_block(x, x * a.transpose());
  EXPECT_NEAR(*ridge_ev_diagnostic(perfect, fit_ridge(perfect, 0.0))[0], 1.0, 1e-12);
  RidgeChain mean_only;
  mean_only.weight = {Matrix::Zero(3, 3)};
  mean_only.bias = {Matrix(perfect.block(1)).colwise().mean().transpose()};
  EXPECT_NEAR(*ridge_ev_diagnostic(perfect, mean_only)[0], 0.0, 1e-12);
  Tensor3 flat = perfect;
  flat.block(1).setConstant(2.0);
  EXPECT_FALSE(ridge_ev_diagnostic(flat, mean_only)[0].has_value());
}

TEST(RidgeArtifact, Roundtrip) {
  std::mt19937_64 rng(12);
  const auto t = oracle::random_tensor(30, 3, 4, rng);
  RidgeArtifact art{fit_normalizer(t), fit_ridge(apply_norm(fit_normalizer(t), t), 0.1), "abc123"};
  const auto back = decode_ridge(encode_ridge(art));
  EXPECT_EQ(back.normalizer, art.normalizer);
  EXPECT_EQ(back.chain, art.chain);
  EXPECT_EQ(back.source_hash, "abc123");
  auto bytes = encode_ridge(art);
  bytes[0] = 'X';
  EXPECT_ERRC(decode_ridge(bytes), Errc::bad_magic);
}
