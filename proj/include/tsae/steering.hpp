// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsae/analysis.hpp"

namespace tsae {

inline constexpr double kDefaultTransferAlpha = 10.0;
inline constexpr std::size_t kDefaultTransferTopP = 50;

/// Token set steered at one step; `global` covers every token.
struct TokenMask {
  bool global = false;
  std::vector<std::uint32_t> tokens;  // sorted, unique

  static TokenMask all() { return {true, {}}; }
  static TokenMask of(std::vector<std::uint32_t> tokens);
  bool contains(std::uint32_t token) const;
  std::size_t size(std::size_t tokens_per_image) const;
  friend bool operator==(const TokenMask&, const TokenMask&) = default;
};

struct SteeringPlan {
  Matrix directions;                    // [total_steps x d]
  std::vector<TokenMask> masks;         // one per step
  double alpha = 0.0;
  std::vector<std::uint32_t> full_step_indices;

  std::size_t steps() const noexcept { return static_cast<std::size_t>(directions.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(directions.cols()); }
  friend bool operator==(const SteeringPlan&, const SteeringPlan&) = default;
};

void validate(const SteeringPlan& plan);

/// Every full step in [tau_i, tau_{i+1}) gets v_i; steps from tau_{T-1} on
/// get v_{T-1}. Steps before tau_0 also get v_0.
Matrix expand_piecewise_constant(const Matrix& per_block, std::span<const std::uint32_t> full_step_indices,
                                 std::size_t total_steps);

/// a <- a + alpha * ||a|| * v_tau for masked tokens (pre-update norm);
/// other rows are copied untouched. `tokens` is [S x d].
Matrix apply_steering(const Matrix& tokens, const SteeringPlan& plan, std::size_t step);
void apply_steering_inplace(MatrixMap tokens, const SteeringPlan& plan, std::size_t step);

/// Steers every image of a dataset: block i uses step tau_i. Without grid
/// metadata each trajectory is its own one-token image.
TrajectoryDataset steer_dataset(const TrajectoryDataset& ds, const SteeringPlan& plan);

/// v_i = phi_{k,i}, expanded over `total_steps` with the same mask at
/// every step. A local mask must be nonempty.
SteeringPlan single_feature_plan(const DecoderTrajectory& traj, const TokenMask& mask, double alpha,
                                 std::span<const std::uint32_t> full_step_indices, std::size_t total_steps);

struct TransferSelection {
  std::vector<std::size_t> features;  // top-p by gamma, descending
  std::vector<double> scores;         // gamma_k for every candidate
  std::vector<double> mean_src;       // masked mean code per latent
  std::vector<double> mean_tgt;
  double lambda_src = 1.0;
  double lambda_tgt = 1.0;
  std::size_t p = kDefaultTransferTopP;
};

/// Masked spatial mean of each code column over the listed rows.
std::vector<double> masked_mean(const Matrix& codes, std::span<const std::uint32_t> rows);

/// gamma_k = c_src_k / sum c_src - c_tgt_k / sum c_tgt over masked means;
/// top-p by gamma descending, ties by ascending index. `mask_*` index rows
/// of `codes_*` (per-token codes; first block for timestep-wise models).
TransferSelection masked_contrast_select(const Matrix& codes_src, const Matrix& codes_tgt,
                                         std::span<const std::uint32_t> mask_src,
                                         std::span<const std::uint32_t> mask_tgt, std::size_t p);

/// v_i = sum over selected k of lambda_tgt * phi_tgt_{k,i} - lambda_src * phi_src_{k,i}.
Matrix transfer_direction(const TransferSelection& selection,
                          const std::map<std::size_t, DecoderTrajectory>& src,
                          const std::map<std::size_t, DecoderTrajectory>& tgt);

// --- plan file -----------------------------------------------------------------

inline constexpr std::uint32_t kPlanVersion = 1;

/// "TSPL", version, u64 header length, JSON header (alpha, steps, width,
/// full-step indices, masks), then directions as float64.
std::vector<unsigned char> encode_plan(const SteeringPlan& plan);
SteeringPlan decode_plan(const std::vector<unsigned char>& bytes, const std::string& context = "plan");

}  // namespace tsae
