// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/sae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tsae {

namespace {

using kernels::ConstRef;
namespace par = kernels::parallel;

void draw_kaiming(Matrix& w, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (auto& v : w.reshaped()) v = normal(rng);
}

void normalize_columns(Matrix& w, std::mt19937_64& rng) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    double n = w.col(c).norm();
    while (!(n > 0.0) || !std::isfinite(n)) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
      n = w.col(c).norm();
    }
    w.col(c) /= n;
  }
}

// Larger value first; equal values by ascending index.
struct ByValueThenIndex {
  bool operator()(const std::pair<double, std::size_t>& a,
                  const std::pair<double, std::size_t>& b) const {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  }
};

void check_input(const SaeModel& model, ConstRef x) {
  require(static_cast<std::size_t>(x.cols()) == model.inputs(), Errc::shape_mismatch,
          "SAE input width " + std::to_string(x.cols()) + " does not match model D=" +
              std::to_string(model.inputs()));
  require(x.rows() > 0, Errc::invalid_argument, "SAE batch must be nonempty");
}

struct Prefix {
  std::size_t end;
  double weight;
};

LossResult prefix_loss_and_grads(const SaeModel& model, ConstRef x, const std::vector<Prefix>& prefixes,
                                 const LossConfig& config, const std::vector<bool>& dead) {
  check_input(model, x);
  const auto b = x.rows();
  const auto dim = x.cols();
  const auto m = static_cast<Eigen::Index>(model.latents());
  const double nel = static_cast<double>(b * dim);

  LossResult out;
  out.fwd = forward(model, x);
  const Matrix& code = out.fwd.code;
  const AuxTerm aux = config.aux_weight > 0.0 ? aux_loss(model, x, out.fwd, dead, config.aux_topk)
                                              : AuxTerm{0.0, Matrix::Zero(b, m), Matrix::Zero(b, dim)};

  // Residual gradients dL/dx_rec_p for every prefix.
  std::vector<Matrix> g(prefixes.size());
  Matrix cur = Matrix::Zero(b, dim);
  cur.rowwise() += model.b_dec.transpose();
  Eigen::Index done = 0;
  for (std::size_t p = 0; p < prefixes.size(); ++p) {
    const auto end = static_cast<Eigen::Index>(prefixes[p].end);
    if (end > done) {
      cur.noalias() += code.middleCols(done, end - done) * model.w_dec.middleCols(done, end - done).transpose();
      done = end;
    }
    const Matrix r = x - cur;
    out.recon_loss += prefixes[p].weight * r.squaredNorm() / nel;
    g[p] = (-2.0 * prefixes[p].weight / nel) * r;
  }

  Matrix f;
  const bool aux_active = config.aux_weight > 0.0 && (aux.code.array() != 0.0).any();
  if (aux_active) {
    out.aux_loss = aux.loss;
    const Matrix e = x - out.fwd.recon;
    f = (2.0 * config.aux_weight / nel) * (aux.recon - e);
    g.back() += f;  // e = x - x_rec_full, so dL/dx_rec_full picks up +f
  }
  out.loss = out.recon_loss + config.aux_weight * out.aux_loss;
  if (!std::isfinite(out.loss)) {
    std::ostringstream msg;
    msg << "non-finite SAE loss (recon=" << out.recon_loss << ", aux=" << out.aux_loss
        << ", max|u|=" << out.fwd.pre.cwiseAbs().maxCoeff() << ")";
    fail(Errc::divergence, msg.str());
  }

  Gradients& grads = out.grads;
  grads.b_dec = Vector::Zero(dim);
  for (const auto& gp : g) grads.b_dec += gp.colwise().sum().transpose();

  // Latents in [end_{p-1}, end_p) feed every prefix from p on.
  grads.w_dec = Matrix::Zero(dim, m);
  Matrix d_code = Matrix::Zero(b, m);
  Matrix suffix = Matrix::Zero(b, dim);
  for (std::size_t p = prefixes.size(); p-- > 0;) {
    suffix += g[p];
    const auto end = static_cast<Eigen::Index>(prefixes[p].end);
    const auto begin = p == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(prefixes[p - 1].end);
    if (end <= begin) continue;
    const auto width = end - begin;
    grads.w_dec.middleCols(begin, width) = par::cross_rows(suffix, code.middleCols(begin, width));
    d_code.middleCols(begin, width).noalias() = suffix * model.w_dec.middleCols(begin, width);
  }
  Matrix d_pre = (code.array() > 0.0).select(d_code, 0.0);
  if (aux_active) {
    grads.w_dec += par::cross_rows(f, aux.code);
    const Matrix d_aux = f * model.w_dec;
    d_pre += (aux.code.array() > 0.0).select(d_aux, 0.0);
  }
  grads.w_enc = par::cross_rows(d_pre, x);
  grads.b_enc = d_pre.colwise().sum().transpose();
  return out;
}

}  // namespace

SaeModel init_model(std::size_t inputs, std::size_t latents, std::size_t k_avg, std::uint64_t seed) {
  require(inputs > 0 && latents > 0, Errc::invalid_argument, "init_model: D and m must be positive");
  require(k_avg > 0 && k_avg <= latents, Errc::invalid_argument, "init_model: need 0 < k_avg <= m");
  std::mt19937_64 rng(seed);
  SaeModel model;
  model.k_avg = k_avg;
  model.w_enc = Matrix(latents, inputs);
  model.w_dec = Matrix(inputs, latents);
  draw_kaiming(model.w_enc, inputs, rng);
  draw_kaiming(model.w_dec, latents, rng);
  normalize_columns(model.w_dec, rng);
  model.b_enc = Vector::Zero(static_cast<Eigen::Index>(latents));
  model.b_dec = Vector::Zero(static_cast<Eigen::Index>(inputs));
  return model;
}

std::vector<std::size_t> even_group_ends(std::size_t latents, std::size_t groups) {
  require(groups > 0 && groups <= latents, Errc::invalid_argument,
          "group partition needs 0 < groups <= latents");
  std::vector<std::size_t> ends(groups);
  std::size_t acc = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    acc += latents / groups + (g < latents % groups ? 1 : 0);
    ends[g] = acc;
  }
  return ends;
}

void validate(const SaeModel& model) {
  const auto m = model.latents(), dim = model.inputs();
  require(m > 0 && dim > 0, Errc::invalid_argument, "SAE model is empty");
  require(static_cast<std::size_t>(model.w_enc.rows()) == m &&
              static_cast<std::size_t>(model.w_enc.cols()) == dim &&
              static_cast<std::size_t>(model.b_enc.size()) == m &&
              static_cast<std::size_t>(model.b_dec.size()) == dim,
          Errc::shape_mismatch, "SAE parameter shapes are inconsistent");
  require(model.k_avg > 0 && model.k_avg <= m, Errc::invalid_argument, "SAE needs 0 < k_avg <= m");
  std::size_t prev = 0;
  for (auto end : model.group_ends) {
    require(end > prev, Errc::invalid_argument, "SAE groups must be nonempty and ascending");
    prev = end;
  }
  require(model.group_ends.empty() || prev == m, Errc::invalid_argument,
          "SAE groups must cover all latents");
}

Matrix batchtopk_select(const Matrix& pre, std::size_t k_avg) {
  Matrix code = Matrix::Zero(pre.rows(), pre.cols());
  const auto cols = static_cast<std::size_t>(pre.cols());
  std::vector<std::pair<double, std::size_t>> positive;
  const double* data = pre.data();
  for (std::size_t i = 0, n = static_cast<std::size_t>(pre.size()); i < n; ++i) {
    if (data[i] > 0.0) positive.emplace_back(data[i], i);
  }
  const std::size_t budget = static_cast<std::size_t>(pre.rows()) * k_avg;
  if (positive.size() > budget) {
    std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(budget),
                     positive.end(), ByValueThenIndex{});
    positive.resize(budget);
  }
  for (const auto& [value, flat] : positive) {
    code(static_cast<Eigen::Index>(flat / cols), static_cast<Eigen::Index>(flat % cols)) = value;
  }
  return code;
}

ForwardPass forward(const SaeModel& model, ConstRef x) {
  check_input(model, x);
  ForwardPass f;
  f.pre = par::affine_rows(x, model.w_enc, model.b_enc);
  f.code = batchtopk_select(f.pre, model.k_avg);
  f.recon = par::affine_rows(f.code, model.w_dec, model.b_dec);
  return f;
}

AuxTerm aux_loss(const SaeModel& model, ConstRef x, const ForwardPass& fwd,
                 const std::vector<bool>& dead, std::size_t aux_topk) {
  const auto b = x.rows(), dim = x.cols();
  const auto m = static_cast<Eigen::Index>(model.latents());
  require(dead.size() == model.latents(), Errc::shape_mismatch, "dead mask must have m entries");
  AuxTerm out{0.0, Matrix::Zero(b, m), Matrix::Zero(b, dim)};
  if (std::none_of(dead.begin(), dead.end(), [](bool v) { return v; }) || aux_topk == 0) return out;

  std::vector<std::pair<double, std::size_t>> cand;
  for (Eigen::Index q = 0; q < b; ++q) {
    cand.clear();
    for (Eigen::Index k = 0; k < m; ++k) {
      if (dead[static_cast<std::size_t>(k)] && fwd.pre(q, k) > 0.0)
        cand.emplace_back(fwd.pre(q, k), static_cast<std::size_t>(k));
    }
    if (cand.size() > aux_topk) {
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(aux_topk), cand.end(),
                       ByValueThenIndex{});
      cand.resize(aux_topk);
    }
    for (const auto& [v, k] : cand) out.code(q, static_cast<Eigen::Index>(k)) = v;
  }
  out.recon.noalias() = out.code * model.w_dec.transpose();
  const Matrix e = x - fwd.recon;
  out.loss = (out.recon - e).squaredNorm() / static_cast<double>(b * dim);
  return out;
}

LossResult loss_and_grads(const SaeModel& model, ConstRef x, const LossConfig& config,
                          const std::vector<bool>& dead) {
  return prefix_loss_and_grads(model, x, {{model.latents(), 1.0}}, config, dead);
}

LossResult matryoshka_loss_and_grads(const SaeModel& model, ConstRef x, const LossConfig& config,
                                     const std::vector<bool>& dead) {
  require(model.grouped(), Errc::invalid_argument, "Matryoshka loss requires latent groups");
  validate(model);
  const double w = 1.0 / static_cast<double>(model.group_ends.size() + 1);
  std::vector<Prefix> prefixes{{0, w}};
  for (auto end : model.group_ends) prefixes.push_back({end, w});
  return prefix_loss_and_grads(model, x, prefixes, config, dead);
}

std::vector<Matrix> prefix_reconstructions(const SaeModel& model, const Matrix& code) {
  require(model.grouped(), Errc::invalid_argument, "prefix reconstructions require latent groups");
  std::vector<Matrix> out;
  Matrix cur = Matrix::Zero(code.rows(), static_cast<Eigen::Index>(model.inputs()));
  cur.rowwise() += model.b_dec.transpose();
  out.push_back(cur);
  Eigen::Index done = 0;
  for (auto end_u : model.group_ends) {
    const auto end = static_cast<Eigen::Index>(end_u);
    cur.noalias() += code.middleCols(done, end - done) * model.w_dec.middleCols(done, end - done).transpose();
    done = end;
    out.push_back(cur);
  }
  return out;
}

// --- optimizer -----------------------------------------------------------------

AdamState make_adam_state(const SaeModel& model) {
  AdamState s;
  auto zeros = [&] {
    return Gradients{Matrix::Zero(model.w_enc.rows(), model.w_enc.cols()),
                     Matrix::Zero(model.w_dec.rows(), model.w_dec.cols()),
                     Vector::Zero(model.b_enc.size()), Vector::Zero(model.b_dec.size())};
  };
  s.m = zeros();
  s.v = zeros();
  return s;
}

namespace {

template <class P>
void adam_update(P& param, const P& grad, P& m, P& v, double lr, double c1, double c2,
                 const AdamConfig& cfg, bool decay) {
  require(grad.rows() == param.rows() && grad.cols() == param.cols() && m.size() == param.size(),
          Errc::shape_mismatch, "adam_step: gradient/state shape mismatch");
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  if (decay && cfg.weight_decay > 0.0) param *= (1.0 - lr * cfg.weight_decay);
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace

void adam_step(SaeModel& model, const Gradients& grads, AdamState& state, const AdamConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double lr = config.learning_rate;
  adam_update(model.w_enc, grads.w_enc, state.m.w_enc, state.v.w_enc, lr, c1, c2, config, true);
  adam_update(model.w_dec, grads.w_dec, state.m.w_dec, state.v.w_dec, lr, c1, c2, config, true);
  adam_update(model.b_enc, grads.b_enc, state.m.b_enc, state.v.b_enc, lr, c1, c2, config, false);
  adam_update(model.b_dec, grads.b_dec, state.m.b_dec, state.v.b_dec, lr, c1, c2, config, false);
}

void renormalize_decoder(SaeModel& model, std::mt19937_64& rng) { normalize_columns(model.w_dec, rng); }

// --- training --------------------------------------------------------------------

void validate(const TrainConfig& c) {
  require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), Errc::config,
          "train: learning_rate must be positive");
  require(c.batch_size > 0, Errc::config, "train: batch_size must be positive");
  require(c.aux_weight >= 0.0, Errc::config, "train: aux_weight must be >= 0");
  require(c.dead_threshold_steps > 0, Errc::config, "train: dead_threshold_steps must be positive");
  require(c.aux_topk > 0, Errc::config, "train: aux_topk must be positive");
  require(c.weight_decay >= 0.0, Errc::config, "train: weight_decay must be >= 0");
}

Matrix encode_batched(const SaeModel& model, ConstRef x, std::size_t batch_size) {
  Matrix code(x.rows(), static_cast<Eigen::Index>(model.latents()));
  const auto bs = static_cast<Eigen::Index>(batch_size);
  for (Eigen::Index begin = 0; begin < x.rows(); begin += bs) {
    const auto n = std::min(bs, x.rows() - begin);
    code.middleRows(begin, n) = forward(model, x.middleRows(begin, n)).code;
  }
  return code;
}

Matrix reconstruct_batched(const SaeModel& model, ConstRef x, std::size_t batch_size) {
  Matrix rec(x.rows(), x.cols());
  const auto bs = static_cast<Eigen::Index>(batch_size);
  for (Eigen::Index begin = 0; begin < x.rows(); begin += bs) {
    const auto n = std::min(bs, x.rows() - begin);
    rec.middleRows(begin, n) = forward(model, x.middleRows(begin, n)).recon;
  }
  return rec;
}

double explained_variance(ConstRef x, ConstRef x_rec) {
  const double sse = (x - x_rec).squaredNorm();
  const RowVector mean = x.colwise().mean();
  const double sst = (x.rowwise() - mean).squaredNorm();
  if (!(sst > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - sse / sst;
}

TrainResult train(const SaeModel& init, ConstRef train_x, ConstRef val_x, const TrainConfig& config) {
  validate(config);
  validate(init);
  require(train_x.rows() > 0 && val_x.rows() > 0, Errc::invalid_argument,
          "train: training and validation sets must be nonempty");
  require(static_cast<std::size_t>(train_x.cols()) == init.inputs() &&
              static_cast<std::size_t>(val_x.cols()) == init.inputs(),
          Errc::shape_mismatch, "train: input width does not match model");

  TrainResult result{init, {}, 0};
  if (config.epochs == 0) return result;

  SaeModel model = init;
  AdamState state = make_adam_state(model);
  const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};
  const LossConfig loss_cfg{config.aux_weight, config.aux_topk};
  std::mt19937_64 rng(config.seed);
  const auto n = static_cast<std::size_t>(train_x.rows());
  const auto m = model.latents();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> since_fired(m, 0);
  std::vector<bool> dead(m, false);
  double best_ev = -std::numeric_limits<double>::infinity();
  Matrix batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const auto rows = std::min(config.batch_size, n - begin);
      batch.resize(static_cast<Eigen::Index>(rows), train_x.cols());
      for (std::size_t r = 0; r < rows; ++r)
        batch.row(static_cast<Eigen::Index>(r)) = train_x.row(static_cast<Eigen::Index>(order[begin + r]));
      for (std::size_t k = 0; k < m; ++k) dead[k] = since_fired[k] >= config.dead_threshold_steps;

      LossResult res;
      try {
        res = model.grouped() ? matryoshka_loss_and_grads(model, batch, loss_cfg, dead)
                              : loss_and_grads(model, batch, loss_cfg, dead);
      } catch (const Error& e) {
        if (e.code() != Errc::divergence) throw;
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what(),
                              result.best_epoch ? result.model : init, result.history);
      }
      adam_step(model, res.grads, state, adam);
      renormalize_decoder(model, rng);
      const auto fired = (res.fwd.code.array() > 0.0).colwise().any();
      for (std::size_t k = 0; k < m; ++k) {
        since_fired[k] = fired(static_cast<Eigen::Index>(k)) ? 0 : since_fired[k] + 1;
      }
      loss_sum += res.loss;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val_ev = explained_variance(val_x, reconstruct_batched(model, val_x, config.batch_size));
    rec.dead_latents = static_cast<std::size_t>(
        std::count_if(since_fired.begin(), since_fired.end(),
                      [&](std::size_t s) { return s >= config.dead_threshold_steps; }));
    result.history.push_back(rec);
    if (!model.w_enc.allFinite() || !model.w_dec.allFinite()) {
      throw DivergenceError("training diverged: non-finite parameters after epoch " + std::to_string(epoch),
                            result.best_epoch ? result.model : init, result.history);
    }
    if (rec.val_ev > best_ev) {
      best_ev = rec.val_ev;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch == 0) {
    // Validation EV undefined throughout (constant validation set): keep the final model.
    result.model = model;
    result.best_epoch = config.epochs;
  }
  return result;
}

// --- serialization ---------------------------------------------------------------

void write_model(io::Writer& w, const SaeModel& model) {
  w.u32(static_cast<std::uint32_t>(model.inputs()));
  w.u32(static_cast<std::uint32_t>(model.latents()));
  w.u32(static_cast<std::uint32_t>(model.k_avg));
  w.u32(static_cast<std::uint32_t>(model.group_ends.size()));
  for (auto e : model.group_ends) w.u32(static_cast<std::uint32_t>(e));
  for (double v : model.w_enc.reshaped<Eigen::RowMajor>()) w.f64(v);
  for (double v : model.b_enc) w.f64(v);
  for (double v : model.w_dec.reshaped<Eigen::RowMajor>()) w.f64(v);
  for (double v : model.b_dec) w.f64(v);
}

SaeModel read_model(io::Reader& r) {
  SaeModel model;
  const auto dim = static_cast<Eigen::Index>(r.u32());
  const auto m = static_cast<Eigen::Index>(r.u32());
  model.k_avg = r.u32();
  const auto groups = r.u32();
  for (std::uint32_t g = 0; g < groups; ++g) model.group_ends.push_back(r.u32());
  model.w_enc = Matrix(m, dim);
  for (auto& v : model.w_enc.reshaped<Eigen::RowMajor>()) v = r.f64();
  model.b_enc = Vector(m);
  for (auto& v : model.b_enc) v = r.f64();
  model.w_dec = Matrix(dim, m);
  for (auto& v : model.w_dec.reshaped<Eigen::RowMajor>()) v = r.f64();
  model.b_dec = Vector(dim);
  for (auto& v : model.b_dec) v = r.f64();
  validate(model);
  return model;
}

}  // namespace tsae
