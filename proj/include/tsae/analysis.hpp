// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsae/dataset.hpp"
#include "tsae/evalmetrics.hpp"

namespace tsae {

/// Per-timestep activation-space directions of one latent, [T x d], in
/// original activation units.
struct DecoderTrajectory {
  Matrix phi;
  std::size_t timesteps() const noexcept { return static_cast<std::size_t>(phi.rows()); }
};

/// Maps a concatenated decoder vector d_k (length T*d, SAE-input space) to
/// activation space: undo the component scales, push residual blocks
/// through the ridge weights (no biases), then apply sigma^a per block.
/// With `chain == nullptr` the blocks are taken as-is (non-residualized).
DecoderTrajectory decoder_to_activation_space(std::span<const double> decoder,
                                              const TimestepNormalizer& activation,
                                              const TimestepNormalizer& component,
                                              const RidgeChain* chain);

/// Same for latent k of a bundle. Timestep-wise bundles stack local
/// latent k of every block's SAE.
DecoderTrajectory decoder_to_activation_space(const ModelBundle& bundle, std::size_t latent);

enum class TemporalGroup { early, middle, late };
std::string to_string(TemporalGroup g);

/// Index ranges [begin, end) of the early/middle/late thirds; for T not
/// divisible by 3 the earlier thirds get the extra indices.
std::array<std::pair<std::size_t, std::size_t>, 3> temporal_thirds(std::size_t timesteps);

struct TemporalProfile {
  std::vector<double> p;               // ||phi_i|| / sum_j ||phi_j||
  std::optional<TemporalGroup> group;  // set when T >= 3
};

/// nullopt for an all-zero trajectory. Group: the third holding a strict
/// majority of the mass, otherwise the third with the largest mass (ties
/// to the earlier third).
std::optional<TemporalProfile> temporal_profile(const DecoderTrajectory& traj);

/// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

/// Mean off-diagonal cosine between the per-timestep directions.
double self_similarity(const DecoderTrajectory& traj);

/// Raw [T x T] cross-timestep cosine matrix.
Matrix similarity_matrix(const DecoderTrajectory& traj);

/// [H x W] cosine between phi_i and every token of image n at block i.
Matrix spatial_cosine_map(const DecoderTrajectory& traj, const TrajectoryDataset& ds, std::size_t image,
                          std::size_t timestep);

inline constexpr double kEntropyEps = 1e-8;

/// Entropy of relu(c)/(sum relu(c) + eps), divided by log(S). nullopt when
/// no cell is positive.
std::optional<double> positive_spatial_entropy(const Matrix& map);

/// Latent codes for every trajectory: one [N x m] matrix for concatenated
/// bundles, one per block otherwise.
std::vector<Matrix> encode_codes(const ModelBundle& bundle, const Tensor3& acts);

struct SampleActivation {
  std::size_t image = 0;
  std::size_t token = 0;
  std::size_t timestep = 0;  // block index; 0 for concatenated codes
  double score = 0.0;
};

/// Firings of `latent` sorted by score descending, ties by (image, token,
/// timestep); at most `count` entries.
std::vector<SampleActivation> top_activating_samples(const std::vector<Matrix>& codes, std::size_t latent,
                                                     std::size_t count, std::size_t tokens_per_image);

/// 8-bit binary PGM of a map with values in [-1, 1].
std::vector<unsigned char> encode_pgm(const Matrix& map);

}  // namespace tsae
