// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/steering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tsae/binary_io.hpp"

namespace tsae {

TokenMask TokenMask::of(std::vector<std::uint32_t> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return {false, std::move(tokens)};
}

bool TokenMask::contains(std::uint32_t token) const {
  return global || std::binary_search(tokens.begin(), tokens.end(), token);
}

std::size_t TokenMask::size(std::size_t tokens_per_image) const {
  return global ? tokens_per_image : tokens.size();
}

void validate(const SteeringPlan& plan) {
  require(plan.masks.size() == plan.steps(), Errc::shape_mismatch, "plan needs one mask per step");
  require(std::isfinite(plan.alpha), Errc::invalid_argument, "steering alpha must be finite");
  require(plan.directions.allFinite(), Errc::invalid_argument, "steering directions must be finite");
  for (const auto& m : plan.masks) {
    require(std::is_sorted(m.tokens.begin(), m.tokens.end()) &&
                std::adjacent_find(m.tokens.begin(), m.tokens.end()) == m.tokens.end(),
            Errc::invalid_argument, "mask tokens must be sorted and unique");
  }
}

Matrix expand_piecewise_constant(const Matrix& per_block, std::span<const std::uint32_t> full_step_indices,
                                 std::size_t total_steps) {
  const auto t = static_cast<std::size_t>(per_block.rows());
  require(t >= 1, Errc::invalid_argument, "expansion needs at least one block");
  require(full_step_indices.size() == t, Errc::shape_mismatch, "one full-step index per block required");
  for (std::size_t i = 1; i < t; ++i) {
    require(full_step_indices[i] > full_step_indices[i - 1], Errc::invalid_argument,
            "full-step indices must be strictly increasing");
  }
  require(total_steps >= std::size_t{full_step_indices.back()} + 1, Errc::invalid_argument,
          "total_steps must exceed the last full-step index");
  Matrix out(static_cast<Eigen::Index>(total_steps), per_block.cols());
  std::size_t block = 0;
  for (std::size_t tau = 0; tau < total_steps; ++tau) {
    while (block + 1 < t && tau >= full_step_indices[block + 1]) ++block;
    out.row(static_cast<Eigen::Index>(tau)) = per_block.row(static_cast<Eigen::Index>(block));
  }
  return out;
}

void apply_steering_inplace(MatrixMap tokens, const SteeringPlan& plan, std::size_t step) {
  require(step < plan.steps(), Errc::invalid_argument,
          "step " + std::to_string(step) + " outside the plan (" + std::to_string(plan.steps()) + " steps)");
  require(static_cast<std::size_t>(tokens.cols()) == plan.width(), Errc::shape_mismatch,
          "activation width does not match the plan");
  const auto& mask = plan.masks[step];
  const auto s = static_cast<std::size_t>(tokens.rows());
  if (!mask.global && !mask.tokens.empty()) {
    require(mask.tokens.back() < s, Errc::invalid_argument,
            "mask token " + std::to_string(mask.tokens.back()) + " outside grid of " + std::to_string(s));
  }
  if (plan.alpha == 0.0) return;
  const auto v = plan.directions.row(static_cast<Eigen::Index>(step));
  auto update = [&](Eigen::Index r) {
    const double norm = tokens.row(r).norm();
    tokens.row(r) += (plan.alpha * norm) * v;
  };
  if (mask.global) {
    for (Eigen::Index r = 0; r < tokens.rows(); ++r) update(r);
  } else {
    for (auto tok : mask.tokens) update(static_cast<Eigen::Index>(tok));
  }
}

Matrix apply_steering(const Matrix& tokens, const SteeringPlan& plan, std::size_t step) {
  Matrix out = tokens;
  apply_steering_inplace(MatrixMap(out.data(), out.rows(), out.cols(), Eigen::OuterStride<>(out.cols())), plan,
                         step);
  return out;
}

TrajectoryDataset steer_dataset(const TrajectoryDataset& ds, const SteeringPlan& plan) {
  validate(plan);
  const std::size_t s = ds.grid() ? ds.grid()->tokens() : 1;
  const auto& steps = ds.meta().full_step_indices;
  Tensor3 data = ds.data();
  for (std::size_t i = 0; i < ds.timesteps(); ++i) {
    require(steps[i] < plan.steps(), Errc::invalid_argument,
            "dataset step " + std::to_string(steps[i]) + " outside the plan");
    for (std::size_t n = 0; n < ds.images(); ++n) {
      MatrixMap view(&data.at(n * s, i, 0), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(ds.channels()),
                     Eigen::OuterStride<>(data.row_size()));
      apply_steering_inplace(view, plan, steps[i]);
    }
  }
  return TrajectoryDataset(std::move(data), ds.grid(), ds.meta());
}

SteeringPlan single_feature_plan(const DecoderTrajectory& traj, const TokenMask& mask, double alpha,
                                 std::span<const std::uint32_t> full_step_indices, std::size_t total_steps) {
  require(mask.global || !mask.tokens.empty(), Errc::invalid_argument, "local steering region is empty");
  SteeringPlan plan;
  plan.directions = expand_piecewise_constant(traj.phi, full_step_indices, total_steps);
  plan.masks.assign(total_steps, mask);
  plan.alpha = alpha;
  plan.full_step_indices.assign(full_step_indices.begin(), full_step_indices.end());
  validate(plan);
  return plan;
}

std::vector<double> masked_mean(const Matrix& codes, std::span<const std::uint32_t> rows) {
  require(!rows.empty(), Errc::invalid_argument, "mask must be nonempty");
  std::vector<double> mean(static_cast<std::size_t>(codes.cols()), 0.0);
  for (auto r : rows) {
    require(r < codes.rows(), Errc::invalid_argument, "mask token " + std::to_string(r) + " out of range");
    for (Eigen::Index k = 0; k < codes.cols(); ++k) mean[static_cast<std::size_t>(k)] += codes(r, k);
  }
  for (auto& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

TransferSelection masked_contrast_select(const Matrix& codes_src, const Matrix& codes_tgt,
                                         std::span<const std::uint32_t> mask_src,
                                         std::span<const std::uint32_t> mask_tgt, std::size_t p) {
  require(codes_src.cols() == codes_tgt.cols(), Errc::shape_mismatch, "source and target latent counts differ");
  TransferSelection sel;
  sel.p = p;
  sel.mean_src = masked_mean(codes_src, mask_src);
  sel.mean_tgt = masked_mean(codes_tgt, mask_tgt);
  const double sum_src = std::accumulate(sel.mean_src.begin(), sel.mean_src.end(), 0.0);
  const double sum_tgt = std::accumulate(sel.mean_tgt.begin(), sel.mean_tgt.end(), 0.0);
  require(sum_src != 0.0 && sum_tgt != 0.0, Errc::invalid_argument,
          "masked codes carry no activation mass; contrast scores need nonzero code sums on both sides");
  const std::size_t m = sel.mean_src.size();
  sel.scores.resize(m);
  for (std::size_t k = 0; k < m; ++k) sel.scores[k] = sel.mean_src[k] / sum_src - sel.mean_tgt[k] / sum_tgt;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sel.scores[a] > sel.scores[b]; });
  order.resize(std::min(p, m));
  sel.features = std::move(order);
  return sel;
}

Matrix transfer_direction(const TransferSelection& selection,
                          const std::map<std::size_t, DecoderTrajectory>& src,
                          const std::map<std::size_t, DecoderTrajectory>& tgt) {
  require(!selection.features.empty(), Errc::invalid_argument, "transfer selection is empty");
  Matrix v;
  for (auto k : selection.features) {
    const auto s = src.find(k);
    const auto t = tgt.find(k);
    require(s != src.end() && t != tgt.end(), Errc::invalid_argument,
            "missing decoder trajectory for selected latent " + std::to_string(k));
    require(s->second.phi.rows() == t->second.phi.rows() && s->second.phi.cols() == t->second.phi.cols(),
            Errc::shape_mismatch, "source and target trajectories differ in shape");
    if (v.size() == 0) v = Matrix::Zero(s->second.phi.rows(), s->second.phi.cols());
    require(v.rows() == s->second.phi.rows() && v.cols() == s->second.phi.cols(), Errc::shape_mismatch,
            "trajectory shapes differ across latents");
    v += selection.lambda_tgt * t->second.phi - selection.lambda_src * s->second.phi;
  }
  return v;
}

std::vector<unsigned char> encode_plan(const SteeringPlan& plan) {
  validate(plan);
  nlohmann::json header;
  header["alpha"] = plan.alpha;
  header["steps"] = plan.steps();
  header["width"] = plan.width();
  header["full_step_indices"] = plan.full_step_indices;
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : plan.masks) {
    if (m.global) {
      masks.push_back("global");
    } else {
      masks.push_back(m.tokens);
    }
  }
  header["masks"] = masks;
  const std::string text = header.dump();
  io::Writer w;
  w.magic("TSPL");
  w.u32(kPlanVersion);
  w.u64(text.size());
  w.raw(text.data(), text.size());
  for (double v : plan.directions.reshaped<Eigen::RowMajor>()) w.f64(v);
  return w.bytes();
}

SteeringPlan decode_plan(const std::vector<unsigned char>& bytes, const std::string& context) {
  io::Reader r(bytes, context);
  r.expect_magic("TSPL");
  const auto version = r.u32();
  require(version == kPlanVersion, Errc::version_mismatch,
          context + ": unsupported plan version " + std::to_string(version));
  const auto len = r.u64();
  require(len <= r.remaining(), Errc::truncated, context + ": truncated header");
  std::string text(static_cast<std::size_t>(len), '\0');
  r.raw(text.data(), text.size());
  SteeringPlan plan;
  try {
    const auto header = nlohmann::json::parse(text);
    plan.alpha = header.at("alpha").get<double>();
    const auto steps = header.at("steps").get<std::size_t>();
    const auto width = header.at("width").get<std::size_t>();
    plan.full_step_indices = header.at("full_step_indices").get<std::vector<std::uint32_t>>();
    for (const auto& m : header.at("masks")) {
      if (m.is_string()) {
        require(m.get<std::string>() == "global", Errc::invalid_argument, context + ": unknown mask keyword");
        plan.masks.push_back(TokenMask::all());
      } else {
        plan.masks.push_back(TokenMask::of(m.get<std::vector<std::uint32_t>>()));
      }
    }
    require(r.remaining() == steps * width * sizeof(double), Errc::truncated,
            context + ": direction payload size mismatch");
    plan.directions.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(width));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::invalid_argument, context + ": malformed plan header: " + e.what());
  }
  for (double& v : plan.directions.reshaped<Eigen::RowMajor>()) v = r.f64();
  validate(plan);
  return plan;
}

}  // namespace tsae
