// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tsae/binary_io.hpp"
#include "tsae/error.hpp"
#include "tsae/kernels.hpp"
#include "tsae/tensor.hpp"

namespace tsae {

/// BatchTopK sparse autoencoder with untied weights.
///   u = W_enc x + b_enc,  h = BatchTopK(ReLU(u)),  x_rec = W_dec h + b_dec
/// Decoder columns are the feature directions and are kept at unit norm.
struct SaeModel {
  Matrix w_enc;  // [m x D]
  Vector b_enc;  // [m]
  Matrix w_dec;  // [D x m]
  Vector b_dec;  // [D]
  std::size_t k_avg = 1;
  /// Matryoshka partition as exclusive group ends (ascending, last == m);
  /// empty for a plain SAE.
  std::vector<std::size_t> group_ends;

  std::size_t inputs() const noexcept { return static_cast<std::size_t>(w_dec.rows()); }
  std::size_t latents() const noexcept { return static_cast<std::size_t>(w_dec.cols()); }
  bool grouped() const noexcept { return !group_ends.empty(); }

  friend bool operator==(const SaeModel&, const SaeModel&) = default;
};

/// Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases, unit decoder
/// columns. Deterministic per seed.
SaeModel init_model(std::size_t inputs, std::size_t latents, std::size_t k_avg, std::uint64_t seed);

/// Splits the latents into `groups` contiguous groups, sizes as even as
/// possible with the earlier groups larger.
std::vector<std::size_t> even_group_ends(std::size_t latents, std::size_t groups);

/// Validates a model's invariants (shapes, k_avg, group table).
void validate(const SaeModel& model);

/// Keeps the min(B*k_avg, #positive) largest post-ReLU entries across the
/// batch; ties go to the smaller (row, column) flat index.
Matrix batchtopk_select(const Matrix& pre, std::size_t k_avg);

struct ForwardPass {
  Matrix pre;    // u [B x m]
  Matrix code;   // h [B x m]
  Matrix recon;  // x_rec [B x D]
};

ForwardPass forward(const SaeModel& model, kernels::ConstRef x);

struct Gradients {
  Matrix w_enc, w_dec;
  Vector b_enc, b_dec;
};

struct LossConfig {
  double aux_weight = 1.0 / 32.0;
  std::size_t aux_topk = 256;
};

struct AuxTerm {
  double loss = 0.0;
  Matrix code;   // aux activations over dead latents [B x m]
  Matrix recon;  // W_dec * code, no bias [B x D]
};

/// Reconstructs e = x - x_rec from the top `aux_topk` dead latents of each
/// row (by post-ReLU pre-activation); mean squared error over B*D. Zero
/// when no latent is dead.
AuxTerm aux_loss(const SaeModel& model, kernels::ConstRef x, const ForwardPass& fwd,
                 const std::vector<bool>& dead, std::size_t aux_topk);

struct LossResult {
  double loss = 0.0;        // total
  double recon_loss = 0.0;  // reconstruction part (prefix average for Matryoshka)
  double aux_loss = 0.0;    // unweighted aux
  Gradients grads;
  ForwardPass fwd;
};

/// Per-element MSE reconstruction plus aux_weight * aux. Gradients treat the
/// BatchTopK mask (and the aux selection) as constant.
LossResult loss_and_grads(const SaeModel& model, kernels::ConstRef x, const LossConfig& config,
                          const std::vector<bool>& dead);

/// Nested-prefix loss: (1/(G+1)) * sum over the G+1 prefixes (b_dec alone,
/// then groups 0..j) of full-input MSE, plus aux_weight * aux. Sparsity is
/// selected over the full latent vector. Requires model.group_ends.
LossResult matryoshka_loss_and_grads(const SaeModel& model, kernels::ConstRef x,
                                     const LossConfig& config, const std::vector<bool>& dead);

/// Decodes prefix reconstructions x_rec_{-1..G-1} of a code (Matryoshka).
std::vector<Matrix> prefix_reconstructions(const SaeModel& model, const Matrix& code);

// --- optimizer -----------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW); 0 gives plain Adam
};

struct AdamState {
  Gradients m, v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const SaeModel& model);

/// One Adam update in place.
void adam_step(SaeModel& model, const Gradients& grads, AdamState& state, const AdamConfig& config);

/// Rescales decoder columns to unit norm; zero columns are redrawn from the
/// initialization distribution using `rng`.
void renormalize_decoder(SaeModel& model, std::mt19937_64& rng);

// --- training --------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 30;
  double aux_weight = 1.0 / 32.0;
  std::size_t dead_threshold_steps = 2000;
  std::size_t aux_topk = 256;
  std::uint64_t seed = 43;
  double weight_decay = 0.0;
};

void validate(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_ev = 0.0;    // SAE-input space, per-batch BatchTopK
  std::size_t dead_latents = 0;
};

struct TrainResult {
  SaeModel model;                  // parameters from the best-val-EV epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;      // 0 when no epoch ran
};

/// Raised when the training loss becomes non-finite; carries the last
/// checkpoint with finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, SaeModel last_good, std::vector<EpochRecord> history)
      : Error(Errc::divergence, what), last_good_(std::move(last_good)), history_(std::move(history)) {}
  const SaeModel& last_good() const noexcept { return last_good_; }
  const std::vector<EpochRecord>& history() const noexcept { return history_; }

 private:
  SaeModel last_good_;
  std::vector<EpochRecord> history_;
};

/// Encodes/decodes `x` in fixed batches of `batch_size` rows (BatchTopK per batch).
Matrix encode_batched(const SaeModel& model, kernels::ConstRef x, std::size_t batch_size);
Matrix reconstruct_batched(const SaeModel& model, kernels::ConstRef x, std::size_t batch_size);

/// 1 - sum ||x - x_rec||^2 / sum ||x - mean(x)||^2.
double explained_variance(kernels::ConstRef x, kernels::ConstRef x_rec);

/// Seeded epoch loop with shuffled minibatches and dead-latent tracking.
/// Grouped models train with the Matryoshka loss.
TrainResult train(const SaeModel& init, kernels::ConstRef train_x, kernels::ConstRef val_x,
                  const TrainConfig& config);

// --- serialization ---------------------------------------------------------------

void write_model(io::Writer& w, const SaeModel& model);
SaeModel read_model(io::Reader& r);

}  // namespace tsae
