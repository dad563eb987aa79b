// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsae/residualize.hpp"
#include "tsae/sae.hpp"

namespace tsae {

struct Variant {
  bool residualized = true;
  bool concatenated = true;
  bool matryoshka = false;  // non-residualized concatenated input with grouped latents

  SaeInputSpec input_spec() const { return {residualized, concatenated}; }
  std::string name() const;
  friend bool operator==(const Variant&, const Variant&) = default;
};

/// Parses "resid_concat", "noresid_concat", "resid_noconcat",
/// "noresid_noconcat" or "matryoshka".
Variant parse_variant(const std::string& name);

enum class BudgetProtocol { trajectory_matched, per_timestep_matched };

std::string to_string(BudgetProtocol p);
BudgetProtocol parse_protocol(const std::string& name);

/// Per-block sparsity for timestep-wise models. trajectory_matched splits
/// k_avg evenly over the T blocks (remainder to the earliest blocks) and
/// rejects budgets that leave a block with 0; per_timestep_matched gives
/// every block k_avg. Concatenated models always use k_avg directly.
std::vector<std::size_t> allocate_budget(BudgetProtocol protocol, std::size_t k_avg, std::size_t timesteps);

/// Everything needed to map SAE outputs back to activation space.
struct ModelBundle {
  Variant variant;
  BudgetProtocol protocol = BudgetProtocol::trajectory_matched;
  std::size_t k_avg = 0;          // trajectory-level configuration value
  double expansion = 0.0;
  std::size_t eval_batch = 256;
  TimestepNormalizer activation;  // mu^a, sigma^a
  std::optional<RidgeChain> chain;
  TimestepNormalizer component;   // mu^z, sigma^z
  std::vector<SaeModel> saes;     // one (concatenated) or one per block

  std::size_t timesteps() const noexcept { return activation.blocks(); }
  std::size_t width() const noexcept { return activation.width(); }
};

void validate(const ModelBundle& bundle);

/// SAE-input tensor x for activations `acts` (original units).
Tensor3 bundle_inputs(const ModelBundle& bundle, const Tensor3& acts);

/// SAE reconstruction of x in SAE-input space, batched per bundle.eval_batch.
Tensor3 bundle_reconstruct_inputs(const ModelBundle& bundle, const Tensor3& x);

/// Teacher-forced reconstruction in original activation units: block 0 is
/// decoded directly; residual block i is added to the ridge prediction
/// from the ground-truth block i-1.
Tensor3 teacher_forced_reconstruct(const ModelBundle& bundle, const Tensor3& acts);

struct EvalReport {
  double mse = 0.0;
  std::optional<double> ev;                       // nullopt: zero-variance denominator
  std::vector<std::optional<double>> ev_per_timestep;
  std::vector<double> mse_per_timestep;
  std::string variant;
  std::string protocol;
  double trajectory_budget = 0.0;                 // average active latents per trajectory
};

/// MSE over M*T*d elements, EV against the global evaluation-set mean and
/// per-timestep EV against per-timestep means.
EvalReport compute_metrics(const Tensor3& a, const Tensor3& a_rec);

/// compute_metrics plus variant/protocol/budget tags for a bundle.
EvalReport evaluate(const ModelBundle& bundle, const Tensor3& acts);

/// Trajectory-level sparse-code budget implied by a bundle.
double trajectory_budget(const ModelBundle& bundle);

/// CSV with header variant,protocol,k_avg,expansion,scope,mse,ev; one
/// "overall" row and one "t<i>" row per timestep.
std::string report_csv(const std::vector<std::pair<EvalReport, const ModelBundle*>>& rows);
std::string format_double(double v);

}  // namespace tsae
