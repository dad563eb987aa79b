// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tsae/binary_io.hpp"
#include "tsae/error.hpp"

namespace tsae {

TrajectoryDataset::TrajectoryDataset(Tensor3 data, std::optional<Grid> grid, TrajectoryMeta meta)
    : data_(std::move(data)), grid_(grid), meta_(std::move(meta)) {
  require(data_.rows() > 0, Errc::invalid_argument, "dataset needs at least one trajectory");
  require(data_.blocks() >= 2, Errc::invalid_argument, "dataset needs at least two timesteps");
  require(data_.width() >= 1, Errc::invalid_argument, "dataset needs at least one channel");
  if (grid_) {
    require(grid_->tokens() > 0, Errc::invalid_argument, "grid must have positive size");
    require(data_.rows() % grid_->tokens() == 0, Errc::invalid_argument,
            "trajectory count must be a multiple of H*W");
  }
  if (meta_.full_step_indices.empty()) {
    meta_.full_step_indices = strided_steps(data_.blocks(), meta_.stride);
  }
  require(meta_.full_step_indices.size() == data_.blocks(), Errc::invalid_argument,
          "full_step_indices must have one entry per timestep");
  for (std::size_t i = 1; i < meta_.full_step_indices.size(); ++i) {
    require(meta_.full_step_indices[i] > meta_.full_step_indices[i - 1], Errc::invalid_argument,
            "full_step_indices must be strictly increasing");
  }
  for (double v : data_.data()) {
    require(std::isfinite(v), Errc::invalid_argument, "dataset contains non-finite values");
  }
}

bool TrajectoryDataset::same_content(const TrajectoryDataset& other) const {
  return data_ == other.data_ && grid_ == other.grid_ && meta_.stride == other.meta_.stride &&
         meta_.full_step_indices == other.meta_.full_step_indices;
}

std::vector<std::uint32_t> strided_steps(std::size_t blocks, std::uint32_t stride) {
  std::vector<std::uint32_t> steps(blocks);
  for (std::size_t i = 0; i < blocks; ++i) steps[i] = static_cast<std::uint32_t>(i) * stride;
  return steps;
}

namespace {

Matrix random_orthogonal(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix g(d, d);
  for (auto& v : g.reshaped()) v = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign-fix so the distribution is Haar and the result is unique.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  return q;
}

Vector random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(d);
  do {
    for (auto& x : v) x = normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  require(spec.trajectories > 0 && spec.timesteps > 0 && spec.channels > 0,
          Errc::invalid_argument, "synthetic spec: dimensions must be positive");
  require(spec.timesteps >= 2, Errc::invalid_argument, "synthetic spec: need T >= 2");
  require(spec.residual_rank <= spec.channels, Errc::invalid_argument,
          "synthetic spec: residual_rank must not exceed d");
  require(spec.residual_sparsity > 0.0 && spec.residual_sparsity <= 1.0, Errc::invalid_argument,
          "synthetic spec: residual_sparsity must be in (0, 1]");
  require(spec.noise_std >= 0.0, Errc::invalid_argument, "synthetic spec: noise_std must be >= 0");
  if (spec.grid) {
    require(spec.grid->tokens() > 0 && spec.trajectories % spec.grid->tokens() == 0,
            Errc::invalid_argument, "synthetic spec: N must be a multiple of H*W");
  }

  const auto n = spec.trajectories, t = spec.timesteps, d = spec.channels, r = spec.residual_rank;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> gain(0.7, 1.0);
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  std::bernoulli_distribution active(spec.residual_sparsity);

  GroundTruth gt;
  for (std::size_t i = 1; i < t; ++i) {
    Matrix q = random_orthogonal(d, rng);
    Vector gains(d);
    for (auto& g : gains) g = gain(rng);
    gt.transition.push_back(spec.dynamics_scale * q * gains.asDiagonal());
    Vector c(d);
    for (auto& v : c) v = 0.5 * normal(rng);
    gt.offset.push_back(std::move(c));
    Matrix dirs(r, d);
    for (std::size_t j = 0; j < r; ++j) dirs.row(j) = random_unit(d, rng).transpose();
    gt.directions.push_back(std::move(dirs));
  }

  Tensor3 data(n, t, d);
  gt.coefficients = Tensor3(n, t - 1, r);
  gt.noise = Tensor3(n, t - 1, d);
  Vector prev(d), next(d);
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t c = 0; c < d; ++c) data.at(q, 0, c) = normal(rng);
    for (std::size_t i = 1; i < t; ++i) {
      for (std::size_t c = 0; c < d; ++c) prev(c) = data.at(q, i - 1, c);
      next = gt.transition[i - 1] * prev + gt.offset[i - 1];
      for (std::size_t j = 0; j < r; ++j) {
        if (!active(rng)) continue;
        const double s = spec.residual_scale * magnitude(rng);
        gt.coefficients.at(q, i - 1, j) = s;
        next += s * gt.directions[i - 1].row(j).transpose();
      }
      if (spec.noise_std > 0.0) {
        for (std::size_t c = 0; c < d; ++c) {
          const double eta = spec.noise_std * normal(rng);
          gt.noise.at(q, i - 1, c) = eta;
          next(c) += eta;
        }
      }
      for (std::size_t c = 0; c < d; ++c) data.at(q, i, c) = next(c);
    }
  }

  TrajectoryMeta meta;
  meta.stride = spec.stride;
  meta.full_step_indices = strided_steps(t, spec.stride);
  meta.seed = spec.seed;
  return {TrajectoryDataset(std::move(data), spec.grid, std::move(meta)), std::move(gt)};
}

PlantedDictionary generate_planted_dictionary(std::size_t n, std::size_t dim, std::size_t atoms,
                                              std::size_t active, std::uint64_t seed) {
  require(n > 0 && dim > 0 && atoms > 0 && active > 0 && active <= atoms, Errc::invalid_argument,
          "planted dictionary: invalid sizes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  PlantedDictionary out;
  out.atoms = Matrix(atoms, dim);
  for (std::size_t a = 0; a < atoms; ++a) out.atoms.row(a) = random_unit(dim, rng).transpose();
  out.codes = Matrix::Zero(n, atoms);
  std::vector<std::size_t> order(atoms);
  for (std::size_t q = 0; q < n; ++q) {
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `active` entries are a uniform draw.
    for (std::size_t j = 0; j < active; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, atoms - 1);
      std::swap(order[j], order[pick(rng)]);
      out.codes(q, order[j]) = magnitude(rng);
    }
  }
  out.samples = out.codes * out.atoms;
  return out;
}

// --- .tsae -------------------------------------------------------------------

void quantize_to_storage(Tensor3& t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

std::vector<unsigned char> encode_trajectories(const TrajectoryDataset& ds) {
  io::Writer w;
  w.magic("TSAE");
  w.u32(kTsaeVersion);
  w.u32(static_cast<std::uint32_t>(ds.trajectories()));
  w.u32(static_cast<std::uint32_t>(ds.timesteps()));
  w.u32(static_cast<std::uint32_t>(ds.channels()));
  w.u32(ds.grid() ? ds.grid()->height : 0);
  w.u32(ds.grid() ? ds.grid()->width : 0);
  w.u32(ds.meta().stride);
  for (auto tau : ds.meta().full_step_indices) w.u32(tau);
  for (double v : ds.data().data()) w.f32(static_cast<float>(v));
  return w.bytes();
}

TrajectoryDataset decode_trajectories(const std::vector<unsigned char>& bytes,
                                      const std::string& context) {
  io::Reader r(bytes, context);
  r.expect_magic("TSAE");
  const auto version = r.u32();
  require(version == kTsaeVersion, Errc::version_mismatch,
          context + ": unsupported format version " + std::to_string(version));
  const std::size_t n = r.u32(), t = r.u32(), d = r.u32();
  const std::uint32_t h = r.u32(), w = r.u32();
  TrajectoryMeta meta;
  meta.stride = r.u32();
  meta.full_step_indices.resize(t);
  for (auto& tau : meta.full_step_indices) tau = r.u32();
  require(r.remaining() >= n * t * d * sizeof(float), Errc::truncated,
          context + ": truncated payload");
  Tensor3 data(n, t, d);
  std::vector<float> buf(n * t * d);
  r.raw(buf.data(), buf.size() * sizeof(float));
  std::copy(buf.begin(), buf.end(), data.data().begin());
  std::optional<Grid> grid;
  if (h != 0 || w != 0) grid = Grid{h, w};
  return TrajectoryDataset(std::move(data), grid, std::move(meta));
}

void save_trajectories(const TrajectoryDataset& ds, const std::string& path) {
  io::write_file(path, encode_trajectories(ds));
}

TrajectoryDataset load_trajectories(const std::string& path) {
  return decode_trajectories(io::read_file(path), path);
}

// --- split -------------------------------------------------------------------

TrajectoryDataset subset_rows(const TrajectoryDataset& ds, std::span<const std::size_t> rows) {
  return TrajectoryDataset(select_rows(ds.data(), rows), ds.grid(), ds.meta());
}

DatasetSplit split(const TrajectoryDataset& ds, double val_fraction, std::uint64_t seed) {
  require(val_fraction > 0.0 && val_fraction < 1.0, Errc::invalid_argument,
          "split: val_fraction must be in (0, 1)");
  const auto images = ds.images();
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(images)));
  require(n_val >= 1, Errc::invalid_argument, "split: validation side would be empty");
  require(n_val < images, Errc::invalid_argument, "split: training side would be empty");

  std::vector<std::size_t> order(images);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val_images(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_images(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_images.begin(), val_images.end());
  std::sort(train_images.begin(), train_images.end());

  const std::size_t per_image = ds.grid() ? ds.grid()->tokens() : 1;
  auto expand = [per_image](const std::vector<std::size_t>& imgs) {
    std::vector<std::size_t> rows;
    rows.reserve(imgs.size() * per_image);
    for (auto img : imgs)
      for (std::size_t s = 0; s < per_image; ++s) rows.push_back(img * per_image + s);
    return rows;
  };
  auto train_rows = expand(train_images);
  auto val_rows = expand(val_images);
  auto train = subset_rows(ds, train_rows);
  auto val = subset_rows(ds, val_rows);
  return {std::move(train), std::move(val), std::move(train_rows), std::move(val_rows)};
}

}  // namespace tsae
