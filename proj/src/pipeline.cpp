// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/pipeline.hpp"

#include <cmath>

#include "tsae/binary_io.hpp"
#include "tsae/hash.hpp"

namespace tsae {

std::size_t total_latents(double expansion, std::size_t timesteps, std::size_t width) {
  require(expansion > 0.0 && std::isfinite(expansion), Errc::config, "expansion must be positive");
  const auto m = static_cast<std::size_t>(std::llround(expansion * static_cast<double>(timesteps * width)));
  return std::max<std::size_t>(m, timesteps);
}

TrainedBundle train_bundle(const Tensor3& train_acts, const Tensor3& val_acts,
                           const TimestepNormalizer& activation, const RidgeChain* chain,
                           const VariantConfig& config) {
  const auto t = train_acts.blocks(), d = train_acts.width();
  require(val_acts.blocks() == t && val_acts.width() == d, Errc::shape_mismatch,
          "train_bundle: train/val shapes differ");
  const Variant& v = config.variant;
  require(!v.matryoshka || (v.concatenated && !v.residualized), Errc::config,
          "matryoshka variant must be non-residualized and concatenated");
  require(!v.residualized || chain != nullptr, Errc::config, "residualized variant needs a ridge chain");

  TrainedBundle out;
  ModelBundle& b = out.bundle;
  b.variant = v;
  b.protocol = config.protocol;
  b.k_avg = config.k_avg;
  b.expansion = config.expansion;
  b.eval_batch = config.eval_batch;
  b.activation = activation;
  if (v.residualized) b.chain = *chain;

  const Tensor3 train_norm = apply_norm(activation, train_acts);
  const Tensor3 val_norm = apply_norm(activation, val_acts);
  SaeInput train_in = build_sae_input(train_norm, chain, v.input_spec());
  const Tensor3 val_x = build_sae_input(val_norm, chain, v.input_spec(), train_in.component);
  b.component = train_in.component;

  const std::size_t m_total = total_latents(config.expansion, t, d);
  if (v.concatenated) {
    require(config.k_avg >= 1 && config.k_avg <= m_total, Errc::config,
            "k_avg=" + std::to_string(config.k_avg) + " must be in [1, " + std::to_string(m_total) + "]");
    SaeModel init = init_model(t * d, m_total, config.k_avg, config.train.seed);
    if (v.matryoshka) init.group_ends = even_group_ends(m_total, t);
    auto run = train(init, train_in.x.flat(), val_x.flat(), config.train);
    b.saes.push_back(run.model);
    out.runs.push_back(std::move(run));
  } else {
    const auto ks = allocate_budget(config.protocol, config.k_avg, t);
    const std::size_t m_block = std::max<std::size_t>(m_total / t, 1);
    for (std::size_t i = 0; i < t; ++i) {
      require(ks[i] <= m_block, Errc::config,
              "block budget " + std::to_string(ks[i]) + " exceeds the " + std::to_string(m_block) +
                  " latents of a timestep SAE");
      const SaeModel init = init_model(d, m_block, ks[i], config.train.seed + i);
      auto run = train(init, train_in.x.block(i), val_x.block(i), config.train);
      b.saes.push_back(run.model);
      out.runs.push_back(std::move(run));
    }
  }
  validate(b);
  return out;
}

namespace {

void write_normalizer(io::Writer& w, const TimestepNormalizer& n) {
  for (double v : n.mu.reshaped<Eigen::RowMajor>()) w.f64(v);
  for (double v : n.sigma.reshaped<Eigen::RowMajor>()) w.f64(v);
}

TimestepNormalizer read_normalizer(io::Reader& r, Eigen::Index t, Eigen::Index d) {
  TimestepNormalizer n;
  n.mu = Matrix(t, d);
  n.sigma = Matrix(t, d);
  for (auto& v : n.mu.reshaped<Eigen::RowMajor>()) v = r.f64();
  for (auto& v : n.sigma.reshaped<Eigen::RowMajor>()) v = r.f64();
  return n;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ModelBundle& b, const std::string& ridge_hash) {
  validate(b);
  io::Writer w;
  w.magic("TSCK");
  w.u32(kCheckpointVersion);
  w.u32(b.variant.residualized);
  w.u32(b.variant.concatenated);
  w.u32(b.variant.matryoshka);
  w.u32(b.protocol == BudgetProtocol::trajectory_matched ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(b.k_avg));
  w.f64(b.expansion);
  w.u32(static_cast<std::uint32_t>(b.eval_batch));
  w.u32(static_cast<std::uint32_t>(b.timesteps()));
  w.u32(static_cast<std::uint32_t>(b.width()));
  w.str(ridge_hash);
  write_normalizer(w, b.component);
  w.u32(static_cast<std::uint32_t>(b.saes.size()));
  for (const auto& sae : b.saes) write_model(w, sae);
  return w.bytes();
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes, const std::string& context) {
  io::Reader r(bytes, context);
  r.expect_magic("TSCK");
  const auto version = r.u32();
  require(version == kCheckpointVersion, Errc::version_mismatch,
          context + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  ModelBundle& b = c.bundle;
  b.variant.residualized = r.u32() != 0;
  b.variant.concatenated = r.u32() != 0;
  b.variant.matryoshka = r.u32() != 0;
  b.protocol = r.u32() == 0 ? BudgetProtocol::trajectory_matched : BudgetProtocol::per_timestep_matched;
  b.k_avg = r.u32();
  b.expansion = r.f64();
  b.eval_batch = r.u32();
  const auto t = static_cast<Eigen::Index>(r.u32());
  const auto d = static_cast<Eigen::Index>(r.u32());
  c.ridge_hash = r.str();
  b.component = read_normalizer(r, t, d);
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) b.saes.push_back(read_model(r));
  return c;
}

ModelBundle load_bundle(const std::string& checkpoint_path, const std::string& ridge_path) {
  Checkpoint c = decode_checkpoint(io::read_file(checkpoint_path), checkpoint_path);
  const auto ridge_bytes = io::read_file(ridge_path);
  const std::string ridge_hash = sha256_hex(ridge_bytes);
  require(ridge_hash == c.ridge_hash, Errc::hash_mismatch,
          checkpoint_path + " was trained against ridge file " + c.ridge_hash + " but " + ridge_path +
              " hashes to " + ridge_hash + "; re-run fit-ridge/train or point at the matching .ridge");
  RidgeArtifact ridge = decode_ridge(ridge_bytes, ridge_path);
  c.bundle.activation = std::move(ridge.normalizer);
  if (c.bundle.variant.residualized) c.bundle.chain = std::move(ridge.chain);
  validate(c.bundle);
  return std::move(c.bundle);
}

}  // namespace tsae
