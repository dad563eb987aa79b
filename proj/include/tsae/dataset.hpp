// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsae/tensor.hpp"

namespace tsae {

struct Grid {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::size_t tokens() const noexcept { return std::size_t{height} * width; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

struct TrajectoryMeta {
  std::uint32_t stride = 1;                      // sampler steps between blocks
  std::vector<std::uint32_t> full_step_indices;  // one per block, strictly increasing
  std::uint64_t seed = 0;                        // not persisted in .tsae files
};

/// N token trajectories x T timestep blocks x d channels, plus optional
/// spatial grid metadata. Trajectories of one image are contiguous when a
/// grid is present (image n owns rows [n*S, (n+1)*S)).
class TrajectoryDataset {
 public:
  TrajectoryDataset(Tensor3 data, std::optional<Grid> grid, TrajectoryMeta meta);

  const Tensor3& data() const noexcept { return data_; }
  const std::optional<Grid>& grid() const noexcept { return grid_; }
  const TrajectoryMeta& meta() const noexcept { return meta_; }

  std::size_t trajectories() const noexcept { return data_.rows(); }
  std::size_t timesteps() const noexcept { return data_.blocks(); }
  std::size_t channels() const noexcept { return data_.width(); }
  std::size_t images() const noexcept {
    return grid_ ? data_.rows() / grid_->tokens() : data_.rows();
  }

  /// Tensors, grid, stride and step indices equal (seed is not compared).
  bool same_content(const TrajectoryDataset& other) const;

 private:
  Tensor3 data_;
  std::optional<Grid> grid_;
  TrajectoryMeta meta_;
};

/// Evenly spaced step indices 0, stride, 2*stride, ...
std::vector<std::uint32_t> strided_steps(std::size_t blocks, std::uint32_t stride);

// --- synthetic trajectories -------------------------------------------------

struct SyntheticSpec {
  std::size_t trajectories = 0;
  std::size_t timesteps = 0;
  std::size_t channels = 0;
  double dynamics_scale = 1.0;    // multiplies every planted transition matrix
  std::size_t residual_rank = 0;  // planted sparse directions per transition
  double residual_sparsity = 0.05;
  double residual_scale = 1.0;    // active coefficients ~ scale * U(0.5, 1.5)
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::optional<Grid> grid;
  std::uint32_t stride = 10;
};

/// The planted process behind a synthetic dataset. Index i in the vectors
/// is the transition into block i+1.
struct GroundTruth {
  std::vector<Matrix> transition;  // A_i [d x d]
  std::vector<Vector> offset;      // c_i [d]
  std::vector<Matrix> directions;  // g_{i,j} as rows [rank x d], unit norm
  Tensor3 coefficients;            // s_{q,i,j} [N x (T-1) x rank], >= 0
  Tensor3 noise;                   // eta_{q,i} [N x (T-1) x d]
};

struct SyntheticData {
  TrajectoryDataset dataset;
  GroundTruth truth;
};

/// a_0 ~ N(0, I); a_i = A_i a_{i-1} + c_i + sum_j s_{q,i,j} g_{i,j} + eta.
/// A_i = dynamics_scale * Q_i * diag(gains), Q_i random orthogonal and
/// gains ~ U[0.7, 1.0]. Values are kept in double precision; saving rounds
/// them to the 32-bit storage format.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Samples built from a known dictionary: each row is sum of exactly
/// `active` atoms with coefficients ~ U(0.5, 1.5). Atoms are unit rows.
struct PlantedDictionary {
  Matrix atoms;    // [atoms x dim]
  Matrix samples;  // [n x dim]
  Matrix codes;    // [n x atoms]
};
PlantedDictionary generate_planted_dictionary(std::size_t n, std::size_t dim, std::size_t atoms,
                                              std::size_t active, std::uint64_t seed);

// --- .tsae binary format -------------------------------------------------------

inline constexpr std::uint32_t kTsaeVersion = 1;

std::vector<unsigned char> encode_trajectories(const TrajectoryDataset& ds);
TrajectoryDataset decode_trajectories(const std::vector<unsigned char>& bytes,
                                      const std::string& context = "tsae");
void save_trajectories(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_trajectories(const std::string& path);

/// Rounds every value to the nearest 32-bit float (the storage precision).
void quantize_to_storage(Tensor3& t);

// --- splitting ---------------------------------------------------------------

struct DatasetSplit {
  TrajectoryDataset train;
  TrajectoryDataset val;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
};

/// Image-level split (whole H*W blocks when a grid is present). The number
/// of validation images is round(val_fraction * images); both sides must be
/// nonempty. Row order within each side follows the original order.
DatasetSplit split(const TrajectoryDataset& ds, double val_fraction, std::uint64_t seed);

/// The listed rows as a new dataset with the same metadata.
TrajectoryDataset subset_rows(const TrajectoryDataset& ds, std::span<const std::size_t> rows);

}  // namespace tsae
