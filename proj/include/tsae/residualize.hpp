// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsae/dataset.hpp"
#include "tsae/kernels.hpp"
#include "tsae/tensor.hpp"

namespace tsae {

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kDefaultRidgeLambda = 0.1;

/// Per-block, per-coordinate standardization with population statistics.
/// Used both for activations (mu^a, sigma^a) and for SAE input components
/// (mu^z, sigma^z).
struct TimestepNormalizer {
  Matrix mu;     // [T x d]
  Matrix sigma;  // [T x d], floored at kSigmaFloor

  std::size_t blocks() const noexcept { return static_cast<std::size_t>(mu.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(mu.cols()); }
  friend bool operator==(const TimestepNormalizer&, const TimestepNormalizer&) = default;
};

TimestepNormalizer fit_normalizer(const Tensor3& train);
Tensor3 apply_norm(const TimestepNormalizer& norm, const Tensor3& x);
Tensor3 invert_norm(const TimestepNormalizer& norm, const Tensor3& x);

/// One affine predictor per adjacent transition: block i is predicted from
/// block i-1 as weight[i-1] * prev + bias[i-1].
struct RidgeChain {
  std::vector<Matrix> weight;  // [d x d], length T-1
  std::vector<Vector> bias;    // [d], length T-1
  double lambda = 0.0;

  std::size_t transitions() const noexcept { return weight.size(); }
  std::size_t timesteps() const noexcept { return weight.size() + 1; }
  std::size_t width() const noexcept {
    return weight.empty() ? 0 : static_cast<std::size_t>(weight.front().rows());
  }
  friend bool operator==(const RidgeChain&, const RidgeChain&) = default;
};

/// Closed-form ridge fit of every transition on centered data; the bias is
/// not penalized. Throws Errc::singular when S_xx + lambda*I is not
/// numerically positive definite (rank-deficient data at lambda = 0).
RidgeChain fit_ridge(const Tensor3& train_normalized, double lambda);

/// Ridge prediction of block `to` (>= 1) from the rows of block `to - 1`.
Matrix predict_block(const RidgeChain& chain, std::size_t to, kernels::ConstRef prev);

/// r_{q,i} = a_{q,i} - (W_i a_{q,i-1} + b_i) for i = 1..T-1, as an
/// [N x (T-1) x d] tensor.
Tensor3 residualize(const Tensor3& normalized, const RidgeChain& chain);

/// Teacher-forced recomposition: block 0 from `first`, block i >= 1 as
/// W_i * teacher_{i-1} + b_i + residual_{i-1}. `residuals` may carry T
/// blocks (block 0 ignored) or T-1 blocks.
Tensor3 recompose(const Tensor3& teacher, const Tensor3& residuals, const RidgeChain& chain,
                  ConstMatrixMap first);

struct SaeInputSpec {
  bool residualized = true;
  bool concatenated = true;
  friend bool operator==(const SaeInputSpec&, const SaeInputSpec&) = default;
};

/// z_q = [a_0, r_1, ..., r_{T-1}] (residualized) or [a_0, ..., a_{T-1}],
/// always [N x T x d]; concatenation only changes how the blocks are fed to
/// SAEs (one row of T*d or T separate rows of d).
Tensor3 build_components(const Tensor3& normalized, const RidgeChain* chain, SaeInputSpec spec);

struct SaeInput {
  Tensor3 x;                      // normalized components [N x T x d]
  TimestepNormalizer component;   // mu^z, sigma^z fitted on this (training) set
};

/// Training side: builds z, fits the component normalizer, returns x.
SaeInput build_sae_input(const Tensor3& normalized, const RidgeChain* chain, SaeInputSpec spec);
/// Evaluation side: applies a training-fitted component normalizer.
Tensor3 build_sae_input(const Tensor3& normalized, const RidgeChain* chain, SaeInputSpec spec,
                        const TimestepNormalizer& component);

/// Per-transition EV of the chain on (validation) normalized data;
/// nullopt where the target block has zero variance.
std::vector<std::optional<double>> ridge_ev_diagnostic(const Tensor3& normalized,
                                                       const RidgeChain& chain);

// --- .ridge sidecar ------------------------------------------------------------

inline constexpr std::uint32_t kRidgeVersion = 1;

struct RidgeArtifact {
  TimestepNormalizer normalizer;  // activation normalizer the chain operates in
  RidgeChain chain;
  std::string source_hash;        // content hash of the training .tsae
};

std::vector<unsigned char> encode_ridge(const RidgeArtifact& artifact);
RidgeArtifact decode_ridge(const std::vector<unsigned char>& bytes, const std::string& context = "ridge");
void save_ridge(const RidgeArtifact& artifact, const std::string& path);
RidgeArtifact load_ridge(const std::string& path);

}  // namespace tsae
