// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/evalmetrics.hpp"

#include <cstdio>
#include <sstream>

#include "tsae/kernels.hpp"

namespace tsae {

std::string Variant::name() const {
  if (matryoshka) return "matryoshka";
  return std::string(residualized ? "resid" : "noresid") + (concatenated ? "_concat" : "_noconcat");
}

Variant parse_variant(const std::string& name) {
  if (name == "resid_concat") return {true, true, false};
  if (name == "noresid_concat") return {false, true, false};
  if (name == "resid_noconcat") return {true, false, false};
  if (name == "noresid_noconcat") return {false, false, false};
  if (name == "matryoshka") return {false, true, true};
  fail(Errc::config, "unknown variant \"" + name +
                         "\" (expected resid_concat, noresid_concat, resid_noconcat, "
                         "noresid_noconcat or matryoshka)");
}

std::string to_string(BudgetProtocol p) {
  return p == BudgetProtocol::trajectory_matched ? "trajectory_matched" : "per_timestep_matched";
}

BudgetProtocol parse_protocol(const std::string& name) {
  if (name == "trajectory_matched") return BudgetProtocol::trajectory_matched;
  if (name == "per_timestep_matched") return BudgetProtocol::per_timestep_matched;
  fail(Errc::config, "unknown budget protocol \"" + name +
                         "\" (expected trajectory_matched or per_timestep_matched)");
}

std::vector<std::size_t> allocate_budget(BudgetProtocol protocol, std::size_t k_avg, std::size_t timesteps) {
  require(k_avg >= 1, Errc::invalid_argument, "allocate_budget: k_avg must be >= 1");
  require(timesteps >= 1, Errc::invalid_argument, "allocate_budget: need at least one block");
  if (protocol == BudgetProtocol::per_timestep_matched) return std::vector<std::size_t>(timesteps, k_avg);
  require(k_avg >= timesteps, Errc::infeasible,
          "allocate_budget: k_avg=" + std::to_string(k_avg) + " cannot give every one of " +
              std::to_string(timesteps) + " blocks a positive budget");
  std::vector<std::size_t> k(timesteps, k_avg / timesteps);
  for (std::size_t i = 0; i < k_avg % timesteps; ++i) ++k[i];
  return k;
}

void validate(const ModelBundle& b) {
  const auto t = b.timesteps(), d = b.width();
  require(t >= 1 && d >= 1, Errc::invalid_argument, "bundle: empty activation normalizer");
  require(b.component.blocks() == t && b.component.width() == d, Errc::shape_mismatch,
          "bundle: component normalizer shape does not match activation normalizer");
  if (b.variant.residualized) {
    require(b.chain.has_value(), Errc::invalid_argument, "bundle: residualized variant needs a ridge chain");
    require(b.chain->timesteps() == t && b.chain->width() == d, Errc::shape_mismatch,
            "bundle: ridge chain shape mismatch");
  }
  const std::size_t expected = b.variant.concatenated ? 1 : t;
  require(b.saes.size() == expected, Errc::shape_mismatch,
          "bundle: expected " + std::to_string(expected) + " SAE(s), found " + std::to_string(b.saes.size()));
  const std::size_t width = b.variant.concatenated ? t * d : d;
  for (const auto& sae : b.saes) {
    validate(sae);
    require(sae.inputs() == width, Errc::shape_mismatch, "bundle: SAE input width mismatch");
  }
  require(b.eval_batch > 0, Errc::invalid_argument, "bundle: eval_batch must be positive");
}

Tensor3 bundle_inputs(const ModelBundle& bundle, const Tensor3& acts) {
  validate(bundle);
  require(acts.blocks() == bundle.timesteps() && acts.width() == bundle.width(), Errc::shape_mismatch,
          "bundle/dataset dimension mismatch: bundle T=" + std::to_string(bundle.timesteps()) +
              " d=" + std::to_string(bundle.width()) + ", data T=" + std::to_string(acts.blocks()) +
              " d=" + std::to_string(acts.width()));
  const Tensor3 normalized = apply_norm(bundle.activation, acts);
  return build_sae_input(normalized, bundle.chain ? &*bundle.chain : nullptr,
                         bundle.variant.input_spec(), bundle.component);
}

Tensor3 bundle_reconstruct_inputs(const ModelBundle& bundle, const Tensor3& x) {
  Tensor3 x_rec(x.rows(), x.blocks(), x.width());
  if (bundle.variant.concatenated) {
    x_rec.flat() = reconstruct_batched(bundle.saes.front(), x.flat(), bundle.eval_batch);
  } else {
    for (std::size_t i = 0; i < x.blocks(); ++i) {
      x_rec.block(i) = reconstruct_batched(bundle.saes[i], x.block(i), bundle.eval_batch);
    }
  }
  return x_rec;
}

Tensor3 teacher_forced_reconstruct(const ModelBundle& bundle, const Tensor3& acts) {
  const Tensor3 x = bundle_inputs(bundle, acts);
  const Tensor3 z_rec = invert_norm(bundle.component, bundle_reconstruct_inputs(bundle, x));
  if (!bundle.variant.residualized) return invert_norm(bundle.activation, z_rec);
  const Tensor3 normalized = apply_norm(bundle.activation, acts);
  const Tensor3 rec = recompose(normalized, z_rec, *bundle.chain, z_rec.block(0));
  return invert_norm(bundle.activation, rec);
}

EvalReport compute_metrics(const Tensor3& a, const Tensor3& a_rec) {
  require(a.same_shape(a_rec), Errc::shape_mismatch, "compute_metrics: shapes differ");
  require(a.rows() > 0, Errc::invalid_argument, "compute_metrics: empty evaluation set");
  const auto sums = kernels::parallel::error_sums(a, a_rec);
  const double per_block = static_cast<double>(a.rows() * a.width());
  EvalReport r;
  const double sse = sums.sse.sum();
  r.mse = sse / (per_block * static_cast<double>(a.blocks()));
  if (sums.sst_global > 0.0) r.ev = 1.0 - sse / sums.sst_global;
  for (Eigen::Index i = 0; i < sums.sse.size(); ++i) {
    r.mse_per_timestep.push_back(sums.sse(i) / per_block);
    r.ev_per_timestep.push_back(sums.sst(i) > 0.0 ? std::optional<double>(1.0 - sums.sse(i) / sums.sst(i))
                                                  : std::nullopt);
  }
  return r;
}

double trajectory_budget(const ModelBundle& bundle) {
  double total = 0.0;
  for (const auto& sae : bundle.saes) total += static_cast<double>(sae.k_avg);
  return total;
}

EvalReport evaluate(const ModelBundle& bundle, const Tensor3& acts) {
  EvalReport r = compute_metrics(acts, teacher_forced_reconstruct(bundle, acts));
  r.variant = bundle.variant.name();
  r.protocol = to_string(bundle.protocol);
  r.trajectory_budget = trajectory_budget(bundle);
  return r;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string report_csv(const std::vector<std::pair<EvalReport, const ModelBundle*>>& rows) {
  std::ostringstream out;
  out << "variant,protocol,k_avg,expansion,scope,mse,ev\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  for (const auto& [report, bundle] : rows) {
    const std::string prefix = report.variant + "," + report.protocol + "," +
                               std::to_string(bundle ? bundle->k_avg : 0) + "," +
                               format_double(bundle ? bundle->expansion : 0.0) + ",";
    out << prefix << "overall," << format_double(report.mse) << "," << opt(report.ev) << "\n";
    for (std::size_t i = 0; i < report.ev_per_timestep.size(); ++i) {
      out << prefix << "t" << i << "," << format_double(report.mse_per_timestep[i]) << ","
          << opt(report.ev_per_timestep[i]) << "\n";
    }
  }
  return out.str();
}

}  // namespace tsae
