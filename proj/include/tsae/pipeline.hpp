// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tsae/evalmetrics.hpp"

namespace tsae {

struct VariantConfig {
  Variant variant;
  BudgetProtocol protocol = BudgetProtocol::trajectory_matched;
  double expansion = 0.5;  // latents = expansion * T * d in total
  std::size_t k_avg = 50;
  std::size_t eval_batch = 256;
  TrainConfig train;
};

/// Total latent count for a trajectory of T blocks of width d.
std::size_t total_latents(double expansion, std::size_t timesteps, std::size_t width);

struct TrainedBundle {
  ModelBundle bundle;
  std::vector<TrainResult> runs;  // one per SAE
};

/// Builds SAE inputs for the variant, trains the SAE(s) and assembles a
/// bundle. `train_acts`/`val_acts` are in original activation units.
TrainedBundle train_bundle(const Tensor3& train_acts, const Tensor3& val_acts,
                           const TimestepNormalizer& activation, const RidgeChain* chain,
                           const VariantConfig& config);

// --- checkpoints -------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint = SAE parameters (float64) + component normalizer + variant
/// metadata. The activation normalizer and ridge chain stay in the .ridge
/// file and are referenced by its content hash.
std::vector<unsigned char> encode_checkpoint(const ModelBundle& bundle, const std::string& ridge_hash);

struct Checkpoint {
  ModelBundle bundle;  // activation/chain left empty until attached
  std::string ridge_hash;
};

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& context = "checkpoint");

/// Loads a checkpoint and its .ridge file, verifying the hash reference.
ModelBundle load_bundle(const std::string& checkpoint_path, const std::string& ridge_path);

}  // namespace tsae
