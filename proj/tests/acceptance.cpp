// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "oracles.hpp"
#include "tsae/analysis.hpp"
#include "tsae/binary_io.hpp"
#include "tsae/commands.hpp"
#include "tsae/pipeline.hpp"
#include "tsae/steering.hpp"

namespace {

using namespace tsae;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <class... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- 1 ---------------------------------------------------------------------------

double gradient_error(bool matryoshka, double beta, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const long d = 12, m = 24, b = 8;
  SaeModel model = init_model(d, m, 3, seed);
  model.b_enc = oracle::random_vector(m, rng, 0.1);
  model.b_dec = oracle::random_vector(d, rng, 0.1);
  if (matryoshka) model.group_ends = {8, 16, 24};
  const Matrix x = oracle::random_matrix(b, d, rng);
  std::vector<bool> dead(m, false);
  for (long k = 0; k < m; k += 3) dead[k] = true;
  const LossConfig cfg{beta, 6};
  auto loss = [&] {
    return matryoshka ? matryoshka_loss_and_grads(model, x, cfg, dead).loss : loss_and_grads(model, x, cfg, dead).loss;
  };
  const auto res = matryoshka ? matryoshka_loss_and_grads(model, x, cfg, dead) : loss_and_grads(model, x, cfg, dead);
  double worst = 0.0;
  auto check = [&](double* p, long r, long c, const Matrix& g) {
    const Matrix fd = oracle::central_difference(loss, p, r, c);
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-12);
    worst = std::max(worst, oracle::max_relative_error(g, fd, 1e-3 * scale));
  };
  check(model.w_enc.data(), m, d, res.grads.w_enc);
  check(model.w_dec.data(), d, m, res.grads.w_dec);
  check(model.b_enc.data(), m, 1, res.grads.b_enc);
  check(model.b_dec.data(), d, 1, res.grads.b_dec);
  return worst;
}

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    worst = std::max(worst, gradient_error(false, 0.0, s));
    worst = std::max(worst, gradient_error(false, 1.0 / 32.0, s + 10));
    worst = std::max(worst, gradient_error(true, 1.0 / 32.0, s + 20));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 10.0, fmt("max rel err %.3g (tol 1e-5), %.2f s (limit 10 s)", worst, secs)};
}

// --- 2 ---------------------------------------------------------------------------

Outcome criterion_ridge() {
  std::mt19937_64 rng(2);
  const std::size_t n = 600, d = 32;
  Tensor3 data(n, 2, d);
  const Matrix a = oracle::random_matrix(d, d, rng, 0.2);
  const Matrix x = oracle::random_matrix(n, d, rng);
  const Matrix noise = oracle::random_matrix(n, d, rng, 0.3);
  const Matrix y = (x * a.transpose() + noise).rowwise() + Eigen::RowVectorXd::Constant(d, 0.5);
  data.block(0) = x;
  data.block(1) = y;
  double worst = 0.0;
  bool monotone = true;
  double prev_norm = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.1, 1.0}) {
    const auto chain = fit_ridge(data, lambda);
    const auto [w, b] = oracle::ridge_cg(x, y, lambda);
    const double err_w = (chain.weight[0] - w).norm() / w.norm();
    const double err_b = (chain.bias[0] - b).norm() / b.norm();
    worst = std::max({worst, err_w, err_b});
  }
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double nrm = fit_ridge(data, lambda).weight[0].norm();
    monotone = monotone && nrm <= prev_norm;
    prev_norm = nrm;
  }
  return {worst <= 1e-6 && monotone,
          fmt("max rel Frobenius err vs CG oracle %.3g (tol 1e-6), shrinkage monotone: %s", worst,
              monotone ? "yes" : "no")};
}

// --- 3 ---------------------------------------------------------------------------

/// m = 2D, W_enc = [I; -I], W_dec = [I, -I]: codes relu(x), relu(-x).
SaeModel identity_sae(std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  SaeModel s;
  s.w_enc = Matrix::Zero(2 * d, d);
  s.w_enc.topRows(d).setIdentity();
  s.w_enc.bottomRows(d) = -Matrix::Identity(d, d);
  s.w_dec = s.w_enc.transpose();
  s.b_enc = Vector::Zero(2 * d);
  s.b_dec = Vector::Zero(d);
  s.k_avg = dim;
  return s;
}

Outcome criterion_identity() {
  std::mt19937_64 rng(3);
  double worst_recompose = 0.0, worst_ev = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 200, t = 4 + trial, d = 6;
    Tensor3 acts = oracle::random_tensor(n, t, d, rng);
    for (auto& v : acts.data()) v = 3.0 * v + 1.5;
    const auto norm = fit_normalizer(acts);
    const auto normalized = apply_norm(norm, acts);
    const auto chain = fit_ridge(normalized, 0.1 * (trial + 1));
    const auto res = residualize(normalized, chain);
    const auto rec = recompose(normalized, res, chain, normalized.block(0));
    for (std::size_t i = 0; i < rec.data().size(); ++i)
      worst_recompose = std::max(worst_recompose, std::abs(rec.data()[i] - normalized.data()[i]));
    for (const char* name : {"resid_concat", "noresid_concat", "resid_noconcat", "noresid_noconcat"}) {
      ModelBundle b;
      b.variant = parse_variant(name);
      b.k_avg = d;
      b.activation = norm;
      if (b.variant.residualized) b.chain = chain;
      b.component = build_sae_input(normalized, &chain, b.variant.input_spec()).component;
      if (b.variant.concatenated) {
        b.saes.push_back(identity_sae(t * d));
      } else {
        for (std::size_t i = 0; i < t; ++i) b.saes.push_back(identity_sae(d));
      }
      const auto report = evaluate(b, acts);
      worst_ev = std::max(worst_ev, std::abs(*report.ev - 1.0));
    }
  }
  return {worst_recompose <= 1e-12 && worst_ev <= 1e-8,
          fmt("recompose max abs err %.3g (tol 1e-12), perfect-code |EV-1| %.3g (tol 1e-8)", worst_recompose,
              worst_ev)};
}

// --- 4 ---------------------------------------------------------------------------

Outcome criterion_batchtopk() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> bdist(1, 16), mdist(1, 40);
  bool ok = true;
  int trials = 0;
  for (; trials < 500; ++trials) {
    const long b = bdist(rng), m = mdist(rng);
    std::uniform_int_distribution<long> kdist(1, m);
    const auto k = static_cast<std::size_t>(kdist(rng));
    Matrix pre = oracle::random_matrix(b, m, rng);
    if (trials % 3 == 0) {
      for (auto& v : pre.reshaped()) v = std::round(v * 2.0) / 2.0;  // force ties
    }
    const Matrix code = batchtopk_select(pre, k);
    const auto positives = (pre.array() > 0.0).count();
    const auto kept = (code.array() != 0.0).count();
    const auto expected = std::min<long>(static_cast<long>(k) * b, positives);
    ok = ok && kept == expected && code == oracle::batchtopk(pre, k) && code == batchtopk_select(pre, k);
  }
  return {ok, fmt("%d randomized batches: count = min(B*k, #pos), oracle-identical and repeatable: %s", trials,
                  ok ? "yes" : "no")};
}

// --- 5 ---------------------------------------------------------------------------

Outcome criterion_decoder_recursion() {
  TimestepNormalizer act{Matrix::Ones(3, 1), Matrix::Ones(3, 1)};
  TimestepNormalizer comp = act;
  RidgeChain chain;
  chain.weight = {Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 2.0)};
  chain.bias = {Vector::Zero(1), Vector::Zero(1)};
  const std::vector<double> dec = {1.0, 0.5, 0.25};
  const auto traj = decoder_to_activation_space(dec, act, comp, &chain);
  const double err1 = std::max({std::abs(traj.phi(0, 0) - 1.0), std::abs(traj.phi(1, 0) - 2.5),
                                std::abs(traj.phi(2, 0) - 5.25)});

  TimestepNormalizer act2{Matrix::Zero(3, 1), (Matrix(3, 1) << 2.0, 3.0, 0.5).finished()};
  TimestepNormalizer comp2{Matrix::Zero(3, 1), (Matrix(3, 1) << 1.5, 0.5, 4.0).finished()};
  RidgeChain c2;
  c2.weight = {Matrix::Constant(1, 1, -0.5), Matrix::Constant(1, 1, 3.0)};
  c2.bias = {Vector::Constant(1, 9.0), Vector::Constant(1, -9.0)};
  const std::vector<double> dec2 = {0.2, -0.4, 0.8};
  const auto tr2 = decoder_to_activation_space(dec2, act2, comp2, &c2);
  const double v0 = 1.5 * 0.2, v1 = -0.5 * v0 + 0.5 * -0.4, v2 = 3.0 * v1 + 4.0 * 0.8;
  const double err2 = std::max({std::abs(tr2.phi(0, 0) - 2.0 * v0), std::abs(tr2.phi(1, 0) - 3.0 * v1),
                                std::abs(tr2.phi(2, 0) - 0.5 * v2)});

  std::mt19937_64 rng(5);
  const std::size_t t = 4, d = 5;
  TimestepNormalizer a3{oracle::random_matrix(t, d, rng), oracle::random_matrix(t, d, rng).cwiseAbs()};
  TimestepNormalizer z3{oracle::random_matrix(t, d, rng), oracle::random_matrix(t, d, rng).cwiseAbs()};
  RidgeChain c3;
  for (std::size_t i = 0; i + 1 < t; ++i) {
    c3.weight.push_back(oracle::random_matrix(d, d, rng));
    c3.bias.push_back(oracle::random_vector(d, rng));
  }
  const Vector x = oracle::random_vector(t * d, rng), y = oracle::random_vector(t * d, rng);
  const Vector s = x + y;
  const auto px = decoder_to_activation_space({x.data(), t * d}, a3, z3, &c3);
  const auto py = decoder_to_activation_space({y.data(), t * d}, a3, z3, &c3);
  const auto ps = decoder_to_activation_space({s.data(), t * d}, a3, z3, &c3);
  const double lin = (ps.phi - px.phi - py.phi).cwiseAbs().maxCoeff();
  const double err = std::max(err1, err2);
  return {err <= 1e-12 && lin <= 1e-10,
          fmt("hand-unrolled fixtures max err %.3g (tol 1e-12), linearity err %.3g (tol 1e-10)", err, lin)};
}

// --- 6 ---------------------------------------------------------------------------

struct OrderingSetup {
  SyntheticSpec spec;
  TrainConfig train;
};

OrderingSetup ordering_setup() {
  OrderingSetup s;
  s.spec.trajectories = 4096;
  s.spec.timesteps = 5;
  s.spec.channels = 32;
  s.spec.residual_rank = 16;
  s.spec.residual_sparsity = 0.1;
  s.spec.residual_scale = 3.0;
  s.spec.noise_std = 0.05;
  s.spec.seed = 606;
  s.train.learning_rate = 1e-3;
  s.train.batch_size = 256;
  s.train.epochs = 30;
  s.train.seed = 43;
  return s;
}

/// Planted predictable fraction per transition in normalized units: one
/// minus the energy of the unpredictable part (sparse residual + noise)
/// over the centered energy of the target block.
std::vector<double> planted_ev(const SyntheticData& syn, const TimestepNormalizer& norm) {
  const auto& a = syn.dataset.data();
  const auto& gt = syn.truth;
  const std::size_t n = a.rows(), t = a.blocks(), d = a.width();
  std::vector<double> out;
  for (std::size_t i = 1; i < t; ++i) {
    Matrix u(n, d);
    for (std::size_t q = 0; q < n; ++q) {
      Vector v = Vector::Zero(d);
      for (long j = 0; j < gt.directions[i - 1].rows(); ++j)
        v += gt.coefficients.at(q, i - 1, j) * gt.directions[i - 1].row(j).transpose();
      for (std::size_t c = 0; c < d; ++c) v(c) += gt.noise.at(q, i - 1, c);
      u.row(q) = v.transpose();
    }
    const Matrix target = a.block(i);
    const Eigen::RowVectorXd mu_u = u.colwise().mean(), mu_a = target.colwise().mean();
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t c = 0; c < d; ++c) {
        const double s2 = norm.sigma(i, c) * norm.sigma(i, c);
        num += std::pow(u(q, c) - mu_u(c), 2) / s2;
        den += std::pow(target(q, c) - mu_a(c), 2) / s2;
      }
    out.push_back(1.0 - num / den);
  }
  return out;
}

Outcome criterion_ordering() {
  const auto t0 = Clock::now();
  const auto setup = ordering_setup();
  const auto syn = generate_synthetic(setup.spec);
  const auto parts = split(syn.dataset, 0.2, setup.spec.seed);
  const auto norm = fit_normalizer(parts.train.data());
  const auto chain = fit_ridge(apply_norm(norm, parts.train.data()), kDefaultRidgeLambda);
  const auto ridge_ev = ridge_ev_diagnostic(apply_norm(norm, parts.val.data()), chain);
  const auto planted = planted_ev(syn, norm);
  bool range_ok = true;
  double lo = 1.0, hi = 0.0;
  for (std::size_t i = 0; i < planted.size(); ++i) {
    lo = std::min({lo, planted[i], *ridge_ev[i]});
    hi = std::max({hi, planted[i], *ridge_ev[i]});
  }
  range_ok = lo >= 0.4 && hi <= 0.8;

  std::string detail = fmt("planted/ridge EV in [%.3f, %.3f];", lo, hi);
  bool ordered = true;
  for (std::size_t k : {8, 16, 32}) {
    double ev[2];
    int idx = 0;
    for (const char* name : {"resid_concat", "noresid_concat"}) {
      VariantConfig vc;
      vc.variant = parse_variant(name);
      vc.k_avg = k;
      vc.train = setup.train;
      const auto tb = train_bundle(parts.train.data(), parts.val.data(), norm, &chain, vc);
      ev[idx++] = *evaluate(tb.bundle, parts.val.data()).ev;
    }
    ordered = ordered && ev[0] > ev[1];
    detail += fmt(" k=%zu resid %.4f vs noresid %.4f;", k, ev[0], ev[1]);
  }
  const double secs = seconds_since(t0);
  detail += fmt(" %.1f s (limit 900 s)", secs);
  return {range_ok && ordered && secs < 900.0, detail};
}

// --- 7 ---------------------------------------------------------------------------

Outcome criterion_dictionary() {
  const auto t0 = Clock::now();
  const std::size_t dim = 32, atoms = 24, latents = 48, active = 3, n_train = 16384, n_val = 2048;
  const auto planted = generate_planted_dictionary(n_train + n_val, dim, atoms, active, 707);
  const Matrix train_x = planted.samples.topRows(n_train);
  const Matrix val_x = planted.samples.bottomRows(n_val);
  TrainConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.batch_size = 256;
  cfg.epochs = 40;
  cfg.seed = 43;
  cfg.dead_threshold_steps = 200;
  const auto run = train(init_model(dim, latents, active, 43), train_x, val_x, cfg);
  const double ev = explained_variance(val_x, reconstruct_batched(run.model, val_x, 256));
  const double recovered = oracle::greedy_recovery(planted.atoms, run.model.w_dec, 0.9);
  const double secs = seconds_since(t0);
  return {ev >= 0.95 && recovered >= 0.8 && secs < 300.0,
          fmt("val EV %.4f (>= 0.95), recovered %.1f%% of atoms at |cos| >= 0.9 (>= 80%%), %.1f s (limit 300 s)", ev,
              100.0 * recovered, secs)};
}

// --- 8 ---------------------------------------------------------------------------

Outcome criterion_metrics() {
  bool ok = true;
  std::string notes;
  {
    Tensor3 a(2, 1, 1), r(2, 1, 1);
    a.at(0, 0, 0) = 0.0;
    a.at(1, 0, 0) = 2.0;
    r.at(0, 0, 0) = 1.0;
    r.at(1, 0, 0) = 1.0;
    const auto m = compute_metrics(a, r);
    ok = ok && m.mse == 1.0 && m.ev && *m.ev == 0.0;
  }
  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = oracle::random_tensor(37 + trial, 3 + trial % 3, 4, rng);
    auto r = a;
    for (auto& v : r.data()) v += 0.3 * std::normal_distribution<double>(0.0, 1.0)(rng);
    const auto m = compute_metrics(a, r);
    const auto o = oracle::metrics(a, r);
    worst = std::max({worst, std::abs(m.mse - o.mse), std::abs(*m.ev - o.ev)});
    for (std::size_t i = 0; i < o.ev_t.size(); ++i) worst = std::max(worst, std::abs(*m.ev_per_timestep[i] - o.ev_t[i]));
    const auto perfect = compute_metrics(a, a);
    ok = ok && perfect.mse == 0.0 && *perfect.ev == 1.0;
    Tensor3 mean_pred = a;
    for (std::size_t i = 0; i < a.blocks(); ++i) {
      const Eigen::RowVectorXd mu = Matrix(a.block(i)).colwise().mean();
      mean_pred.block(i).rowwise() = mu;
    }
    for (const auto& ev : compute_metrics(a, mean_pred).ev_per_timestep) worst = std::max(worst, std::abs(*ev));
  }
  ok = ok && worst <= 1e-12;

  Matrix uniform = Matrix::Constant(4, 4, 0.3);
  Matrix onehot = Matrix::Zero(4, 4);
  onehot(1, 2) = 0.7;
  const double hu = *positive_spatial_entropy(uniform), ho = *positive_spatial_entropy(onehot);
  ok = ok && std::abs(hu - 1.0) <= 1e-6 && ho <= 1e-6;

  double ss_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    DecoderTrajectory tr{oracle::random_matrix(2 + trial % 5, 6, rng)};
    if (trial % 4 == 0) tr.phi.row(0).setZero();
    ss_err = std::max(ss_err, std::abs(self_similarity(tr) - oracle::self_similarity(tr.phi)));
  }
  DecoderTrajectory flip{(Matrix(3, 2) << 1, 0, 1, 0, -1, 0).finished()};
  ss_err = std::max(ss_err, std::abs(self_similarity(flip) + 1.0 / 3.0));
  ok = ok && ss_err <= 1e-12;
  return {ok, fmt("metric err vs loop oracle %.3g (tol 1e-12), entropy uniform %.8f one-hot %.3g, self-sim err %.3g",
                  worst, hu, ho, ss_err)};
}

// --- 9 ---------------------------------------------------------------------------

Outcome criterion_steering() {
  std::mt19937_64 rng(9);
  const std::size_t s = 16, d = 6;
  const std::vector<std::uint32_t> steps = {0, 10, 20, 30, 40};
  const Matrix per_block = oracle::random_matrix(5, d, rng);
  const Matrix expanded = expand_piecewise_constant(per_block, steps, 50);
  bool boundaries = true;
  for (std::size_t i = 0; i < steps.size(); ++i) boundaries = boundaries && expanded.row(steps[i]) == per_block.row(i);
  for (std::size_t tau = 0; tau < 50; ++tau) boundaries = boundaries && expanded.row(tau) == per_block.row(tau / 10);

  bool identity = true, outside = true;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix tokens = oracle::random_matrix(s, d, rng);
    std::vector<std::uint32_t> picked;
    for (std::uint32_t tok = 0; tok < s; ++tok)
      if (std::bernoulli_distribution(0.3)(rng)) picked.push_back(tok);
    const auto mask = TokenMask::of(picked);
    auto plan = single_feature_plan(DecoderTrajectory{per_block}, TokenMask::all(), 0.0, steps, 50);
    plan.masks.assign(50, mask);
    identity = identity && apply_steering(tokens, plan, 17) == tokens;
    plan.alpha = 5.0;
    const Matrix out = apply_steering(tokens, plan, 23);
    for (std::uint32_t tok = 0; tok < s; ++tok) {
      if (!mask.contains(tok)) outside = outside && out.row(tok) == tokens.row(tok);
    }
    plan.masks.assign(50, TokenMask::of({}));
    identity = identity && apply_steering(tokens, plan, 3) == tokens;
  }

  TransferSelection sel;
  sel.features = {1, 4};
  std::map<std::size_t, DecoderTrajectory> src, tgt;
  for (auto k : sel.features) src.emplace(k, DecoderTrajectory{oracle::random_matrix(5, d, rng)});
  tgt = src;
  const double cancel = transfer_direction(sel, src, tgt).cwiseAbs().maxCoeff();
  sel.lambda_src = sel.lambda_tgt = 0.0;
  const double zero = transfer_direction(sel, src, tgt).cwiseAbs().maxCoeff();
  const bool ok = boundaries && identity && outside && cancel == 0.0 && zero == 0.0;
  return {ok, fmt("boundaries %s, alpha=0/empty-mask identity %s, out-of-mask bit-identical %s, cancellation %.3g",
                  boundaries ? "exact" : "WRONG", identity ? "bitwise" : "BROKEN", outside ? "yes" : "NO", cancel)};
}

// --- 10 --------------------------------------------------------------------------

std::vector<unsigned char> slurp(const std::filesystem::path& p) { return io::read_file(p.string()); }

Outcome criterion_determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "tsae_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "run.json";
  {
    std::ofstream f(config);
    f << R"({
  "dataset": {"synthetic": {"trajectories": 512, "timesteps": 5, "channels": 8, "residual_rank": 6,
                            "residual_sparsity": 0.2, "noise_std": 0.05, "grid": [4, 4]}},
  "val_fraction": 0.25,
  "model": {"variant": "resid_concat", "k_avg": 6},
  "train": {"epochs": 3, "batch_size": 64, "learning_rate": 1e-3},
  "analysis": {"images": 2, "top_samples": 5, "map_latents": 2}
})";
  }
  bool ran = true;
  for (const char* dir : {"a", "b"}) {
    for (const char* cmd : {"synth", "fit-ridge", "train", "eval", "analyze", "steer"}) {
      const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + config.string() + "\" --seed 11 --out \"" +
                               (root / dir).string() + "\" 2>/dev/null";
      ran = ran && std::system(line.c_str()) == 0;
    }
  }
  if (!ran) return {false, "CLI pipeline failed to run"};
  bool same = true;
  std::string diff;
  for (const char* f : {"train.tsae", "val.tsae", "ridge.ridge", "ridge_ev.csv", "model.ckpt", "history.json",
                        "eval.csv", "eval.json", "analysis/groups.csv", "analysis/latents.json", "plan.tspl",
                        "steered.tsae"}) {
    if (slurp(root / "a" / f) != slurp(root / "b" / f)) {
      same = false;
      diff += std::string(" ") + f;
    }
  }
  return {same, same ? "two seeded CLI runs byte-identical across 12 artifacts (CSVs, checkpoint, plan)"
                     : "differing artifacts:" + diff};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : TSAE_CLI_PATH;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness (BatchTopK, aux, Matryoshka)", criterion_gradients},
      {"ridge closed form vs iterative oracle", criterion_ridge},
      {"de-residualization identity and perfect-code EV", criterion_identity},
      {"BatchTopK exactness", criterion_batchtopk},
      {"decoder-trajectory recursion", criterion_decoder_recursion},
      {"synthetic ordering Resid+Concat > NoResid+Concat", criterion_ordering},
      {"dictionary recovery", criterion_dictionary},
      {"metric fixtures", criterion_metrics},
      {"steering invariants", criterion_steering},
      {"end-to-end determinism", [&] { return criterion_determinism(cli); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %zu: %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
