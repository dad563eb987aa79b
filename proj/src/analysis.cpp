// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsae {

DecoderTrajectory decoder_to_activation_space(std::span<const double> decoder,
                                              const TimestepNormalizer& activation,
                                              const TimestepNormalizer& component,
                                              const RidgeChain* chain) {
  const auto t = static_cast<Eigen::Index>(activation.blocks());
  const auto d = static_cast<Eigen::Index>(activation.width());
  require(static_cast<Eigen::Index>(decoder.size()) == t * d, Errc::shape_mismatch,
          "decoder vector length must be T*d");
  require(component.blocks() == activation.blocks() && component.width() == activation.width(),
          Errc::shape_mismatch, "component and activation normalizers differ in shape");
  if (chain) {
    require(chain->timesteps() == activation.blocks() && chain->width() == activation.width(),
            Errc::shape_mismatch, "ridge chain shape mismatch");
  }
  const Eigen::Map<const Matrix> blocks(decoder.data(), t, d);
  const Matrix dz = blocks.cwiseProduct(component.sigma);
  Matrix phi_bar(t, d);
  phi_bar.row(0) = dz.row(0);
  for (Eigen::Index i = 1; i < t; ++i) {
    if (chain) {
      phi_bar.row(i) = (chain->weight[static_cast<std::size_t>(i - 1)] * phi_bar.row(i - 1).transpose()).transpose() +
                       dz.row(i);
    } else {
      phi_bar.row(i) = dz.row(i);
    }
  }
  return {phi_bar.cwiseProduct(activation.sigma)};
}

DecoderTrajectory decoder_to_activation_space(const ModelBundle& bundle, std::size_t latent) {
  validate(bundle);
  const auto d = static_cast<Eigen::Index>(bundle.width());
  Vector column(static_cast<Eigen::Index>(bundle.timesteps()) * d);
  if (bundle.variant.concatenated) {
    const auto& sae = bundle.saes.front();
    require(latent < sae.latents(), Errc::invalid_argument,
            "latent " + std::to_string(latent) + " out of range (m=" + std::to_string(sae.latents()) + ")");
    column = sae.w_dec.col(static_cast<Eigen::Index>(latent));
  } else {
    for (std::size_t i = 0; i < bundle.saes.size(); ++i) {
      const auto& sae = bundle.saes[i];
      require(latent < sae.latents(), Errc::invalid_argument,
              "latent " + std::to_string(latent) + " out of range (m=" + std::to_string(sae.latents()) + ")");
      column.segment(static_cast<Eigen::Index>(i) * d, d) = sae.w_dec.col(static_cast<Eigen::Index>(latent));
    }
  }
  return decoder_to_activation_space({column.data(), static_cast<std::size_t>(column.size())},
                                     bundle.activation, bundle.component,
                                     bundle.variant.residualized ? &*bundle.chain : nullptr);
}

std::string to_string(TemporalGroup g) {
  switch (g) {
    case TemporalGroup::early: return "early";
    case TemporalGroup::middle: return "middle";
    case TemporalGroup::late: return "late";
  }
  return "unknown";
}

std::array<std::pair<std::size_t, std::size_t>, 3> temporal_thirds(std::size_t timesteps) {
  std::array<std::pair<std::size_t, std::size_t>, 3> out{};
  std::size_t begin = 0;
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t size = timesteps / 3 + (g < timesteps % 3 ? 1 : 0);
    out[g] = {begin, begin + size};
    begin += size;
  }
  return out;
}

std::optional<TemporalProfile> temporal_profile(const DecoderTrajectory& traj) {
  const auto t = traj.timesteps();
  std::vector<double> norms(t);
  double total = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    norms[i] = traj.phi.row(static_cast<Eigen::Index>(i)).norm();
    total += norms[i];
  }
  if (!(total > 0.0)) return std::nullopt;
  TemporalProfile prof;
  prof.p.resize(t);
  for (std::size_t i = 0; i < t; ++i) prof.p[i] = norms[i] / total;
  if (t >= 3) {
    std::array<double, 3> mass{};
    const auto thirds = temporal_thirds(t);
    for (std::size_t g = 0; g < 3; ++g)
      for (std::size_t i = thirds[g].first; i < thirds[g].second; ++i) mass[g] += prof.p[i];
    std::size_t pick = 0;
    for (std::size_t g = 1; g < 3; ++g)
      if (mass[g] > mass[pick]) pick = g;
    prof.group = static_cast<TemporalGroup>(pick);
  }
  return prof;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), Errc::shape_mismatch, "cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

std::span<const double> row_span(const Matrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

Matrix similarity_matrix(const DecoderTrajectory& traj) {
  const auto t = traj.phi.rows();
  Matrix s(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j) s(i, j) = cosine(row_span(traj.phi, i), row_span(traj.phi, j));
  return s;
}

double self_similarity(const DecoderTrajectory& traj) {
  const auto t = traj.phi.rows();
  require(t >= 2, Errc::invalid_argument, "self_similarity needs T >= 2");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j)
      if (i != j) sum += cosine(row_span(traj.phi, i), row_span(traj.phi, j));
  return sum / static_cast<double>(t * (t - 1));
}

Matrix spatial_cosine_map(const DecoderTrajectory& traj, const TrajectoryDataset& ds, std::size_t image,
                          std::size_t timestep) {
  require(ds.grid().has_value(), Errc::invalid_argument, "spatial maps need grid metadata");
  require(traj.timesteps() == ds.timesteps() && static_cast<std::size_t>(traj.phi.cols()) == ds.channels(),
          Errc::shape_mismatch, "trajectory shape does not match dataset");
  require(image < ds.images(), Errc::invalid_argument, "image index out of range");
  require(timestep < ds.timesteps(), Errc::invalid_argument, "timestep out of range");
  const auto& grid = *ds.grid();
  Matrix map(grid.height, grid.width);
  const auto dir = row_span(traj.phi, static_cast<Eigen::Index>(timestep));
  for (std::size_t u = 0; u < grid.height; ++u)
    for (std::size_t v = 0; v < grid.width; ++v) {
      const std::size_t row = image * grid.tokens() + u * grid.width + v;
      map(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = cosine(dir, ds.data().vec(row, timestep));
    }
  return map;
}

std::optional<double> positive_spatial_entropy(const Matrix& map) {
  const auto s = map.size();
  require(s >= 2, Errc::invalid_argument, "positive_spatial_entropy needs at least 2 cells");
  const Matrix pos = map.cwiseMax(0.0);
  const double total = pos.sum();
  if (!(total > 0.0)) return std::nullopt;
  double h = 0.0;
  for (double c : pos.reshaped()) {
    const double p = c / (total + kEntropyEps);
    h -= p * std::log(p + kEntropyEps);
  }
  return h / std::log(static_cast<double>(s));
}

std::vector<Matrix> encode_codes(const ModelBundle& bundle, const Tensor3& acts) {
  const Tensor3 x = bundle_inputs(bundle, acts);
  std::vector<Matrix> codes;
  if (bundle.variant.concatenated) {
    codes.push_back(encode_batched(bundle.saes.front(), x.flat(), bundle.eval_batch));
  } else {
    for (std::size_t i = 0; i < x.blocks(); ++i)
      codes.push_back(encode_batched(bundle.saes[i], x.block(i), bundle.eval_batch));
  }
  return codes;
}

std::vector<SampleActivation> top_activating_samples(const std::vector<Matrix>& codes, std::size_t latent,
                                                     std::size_t count, std::size_t tokens_per_image) {
  require(!codes.empty(), Errc::invalid_argument, "top_activating_samples: no codes");
  require(tokens_per_image > 0, Errc::invalid_argument, "tokens_per_image must be positive");
  for (const auto& c : codes) {
    require(latent < static_cast<std::size_t>(c.cols()), Errc::invalid_argument,
            "latent " + std::to_string(latent) + " out of range");
  }
  std::vector<SampleActivation> hits;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto& c = codes[i];
    for (Eigen::Index q = 0; q < c.rows(); ++q) {
      const double v = c(q, static_cast<Eigen::Index>(latent));
      if (v > 0.0) {
        const auto row = static_cast<std::size_t>(q);
        hits.push_back({row / tokens_per_image, row % tokens_per_image, i, v});
      }
    }
  }
  auto before = [](const SampleActivation& a, const SampleActivation& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image != b.image) return a.image < b.image;
    if (a.token != b.token) return a.token < b.token;
    return a.timestep < b.timestep;
  };
  if (hits.size() > count) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(count), hits.end(), before);
    hits.resize(count);
  } else {
    std::sort(hits.begin(), hits.end(), before);
  }
  return hits;
}

std::vector<unsigned char> encode_pgm(const Matrix& map) {
  const std::string header =
      "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (Eigen::Index r = 0; r < map.rows(); ++r)
    for (Eigen::Index c = 0; c < map.cols(); ++c) {
      const double v = std::clamp((map(r, c) + 1.0) * 0.5, 0.0, 1.0);
      out.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  return out;
}

}  // namespace tsae
