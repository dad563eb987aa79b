// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "tsae/binary_io.hpp"

namespace tsae {

using nlohmann::json;

namespace {

/// Reads typed fields from one JSON object and rejects unknown keys.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(Errc::config, "config: \"" + path_ + "\" must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(Errc::config, "config: \"" + field(key) + "\" has the wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(Errc::config, "config: unknown field \"" + field(key.c_str()) + "\"");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SyntheticSpec parse_synthetic(const json& j, std::uint64_t seed) {
  Section s(j, "dataset.synthetic");
  SyntheticSpec spec;
  spec.seed = seed;
  s.get("trajectories", spec.trajectories);
  s.get("timesteps", spec.timesteps);
  s.get("channels", spec.channels);
  s.get("dynamics_scale", spec.dynamics_scale);
  s.get("residual_rank", spec.residual_rank);
  s.get("residual_sparsity", spec.residual_sparsity);
  s.get("residual_scale", spec.residual_scale);
  s.get("noise_std", spec.noise_std);
  s.get("seed", spec.seed);
  s.get("stride", spec.stride);
  if (s.has("grid")) {
    const auto& g = s.at("grid");
    try {
      spec.grid = Grid{g.at(0).get<std::uint32_t>(), g.at(1).get<std::uint32_t>()};
    } catch (const json::exception&) {
      fail(Errc::config, "config: \"dataset.synthetic.grid\" must be [height, width]");
    }
  }
  s.finish();
  return spec;
}

json synthetic_json(const SyntheticSpec& spec) {
  json j = {{"trajectories", spec.trajectories}, {"timesteps", spec.timesteps},
            {"channels", spec.channels},         {"dynamics_scale", spec.dynamics_scale},
            {"residual_rank", spec.residual_rank}, {"residual_sparsity", spec.residual_sparsity},
            {"residual_scale", spec.residual_scale}, {"noise_std", spec.noise_std},
            {"seed", spec.seed},                 {"stride", spec.stride}};
  if (spec.grid) j["grid"] = {spec.grid->height, spec.grid->width};
  return j;
}

}  // namespace

RunConfig parse_config(const json& j, bool check_files) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("out", c.out);
  root.get("threads", c.threads);
  root.get("val_fraction", c.val_fraction);
  c.model.train.seed = c.seed;

  if (root.has("dataset")) {
    Section ds(root.at("dataset"), "dataset");
    if (ds.has("synthetic")) c.synthetic = parse_synthetic(ds.at("synthetic"), c.seed);
    if (ds.has("path")) {
      std::string p;
      ds.get("path", p);
      c.dataset_path = p;
    }
    ds.finish();
  }
  if (root.has("ridge")) {
    Section r(root.at("ridge"), "ridge");
    r.get("lambda", c.ridge_lambda);
    r.finish();
  }
  if (root.has("model")) {
    Section m(root.at("model"), "model");
    std::string variant = c.model.variant.name();
    std::string protocol = to_string(c.model.protocol);
    m.get("variant", variant);
    m.get("protocol", protocol);
    try {
      c.model.variant = parse_variant(variant);
      c.model.protocol = parse_protocol(protocol);
    } catch (const Error& e) {
      fail(Errc::config, std::string("config: ") + e.what());
    }
    m.get("expansion", c.model.expansion);
    m.get("k_avg", c.model.k_avg);
    m.get("eval_batch", c.model.eval_batch);
    m.finish();
  }
  if (root.has("train")) {
    Section t(root.at("train"), "train");
    auto& tc = c.model.train;
    t.get("learning_rate", tc.learning_rate);
    t.get("batch_size", tc.batch_size);
    t.get("epochs", tc.epochs);
    t.get("aux_weight", tc.aux_weight);
    t.get("dead_threshold_steps", tc.dead_threshold_steps);
    t.get("aux_topk", tc.aux_topk);
    t.get("seed", tc.seed);
    t.get("weight_decay", tc.weight_decay);
    t.finish();
  }
  if (root.has("analysis")) {
    Section a(root.at("analysis"), "analysis");
    a.get("latents", c.analysis.latents);
    a.get("images", c.analysis.images);
    a.get("top_samples", c.analysis.top_samples);
    a.get("map_latents", c.analysis.map_latents);
    a.finish();
  }
  if (root.has("steer")) {
    Section s(root.at("steer"), "steer");
    auto& sc = c.steer;
    s.get("mode", sc.mode);
    s.get("latent", sc.latent);
    s.get("alpha", sc.alpha);
    if (s.has("mask")) {
      const auto& m = s.at("mask");
      if (m.is_string() && m.get<std::string>() == "global") {
        sc.mask.reset();
      } else {
        std::vector<std::uint32_t> tokens;
        s.get("mask", tokens);
        sc.mask = TokenMask::of(std::move(tokens)).tokens;
      }
    }
    s.get("total_steps", sc.total_steps);
    s.get("source_image", sc.source_image);
    s.get("target_image", sc.target_image);
    s.get("mask_src", sc.mask_src);
    s.get("mask_tgt", sc.mask_tgt);
    sc.mask_src = TokenMask::of(std::move(sc.mask_src)).tokens;
    sc.mask_tgt = TokenMask::of(std::move(sc.mask_tgt)).tokens;
    s.get("p", sc.p);
    s.get("lambda_src", sc.lambda_src);
    s.get("lambda_tgt", sc.lambda_tgt);
    s.get("apply", sc.apply);
    s.finish();
  }
  root.finish();
  validate(c, check_files);
  return c;
}

RunConfig load_config(const std::string& path, bool check_files) {
  const auto bytes = io::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    fail(Errc::config, "config " + path + ": " + e.what());
  }
  return parse_config(j, check_files);
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["threads"] = c.threads;
  j["val_fraction"] = c.val_fraction;
  json ds = json::object();
  if (c.synthetic) ds["synthetic"] = synthetic_json(*c.synthetic);
  if (c.dataset_path) ds["path"] = *c.dataset_path;
  j["dataset"] = ds;
  j["ridge"] = {{"lambda", c.ridge_lambda}};
  j["model"] = {{"variant", c.model.variant.name()},
                {"protocol", to_string(c.model.protocol)},
                {"expansion", c.model.expansion},
                {"k_avg", c.model.k_avg},
                {"eval_batch", c.model.eval_batch}};
  const auto& t = c.model.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"aux_weight", t.aux_weight},
                {"dead_threshold_steps", t.dead_threshold_steps},
                {"aux_topk", t.aux_topk},
                {"seed", t.seed},
                {"weight_decay", t.weight_decay}};
  j["analysis"] = {{"latents", c.analysis.latents},
                   {"images", c.analysis.images},
                   {"top_samples", c.analysis.top_samples},
                   {"map_latents", c.analysis.map_latents}};
  const auto& s = c.steer;
  j["steer"] = {{"mode", s.mode},
                {"latent", s.latent},
                {"alpha", s.alpha},
                {"total_steps", s.total_steps},
                {"source_image", s.source_image},
                {"target_image", s.target_image},
                {"mask_src", s.mask_src},
                {"mask_tgt", s.mask_tgt},
                {"p", s.p},
                {"lambda_src", s.lambda_src},
                {"lambda_tgt", s.lambda_tgt},
                {"apply", s.apply}};
  if (s.mask) {
    j["steer"]["mask"] = *s.mask;
  } else {
    j["steer"]["mask"] = "global";
  }
  return j;
}

void validate(const RunConfig& c, bool check_files) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) fail(Errc::config, "config: " + msg);
  };
  need(c.synthetic.has_value() != c.dataset_path.has_value(),
       "exactly one dataset source (dataset.synthetic or dataset.path) is required");
  need(!c.out.empty(), "\"out\" must be a directory name");
  need(c.threads >= 0, "\"threads\" must be >= 0");
  need(c.val_fraction > 0.0 && c.val_fraction < 1.0, "\"val_fraction\" must be in (0, 1)");
  need(std::isfinite(c.ridge_lambda) && c.ridge_lambda >= 0.0, "\"ridge.lambda\" must be >= 0");
  need(std::isfinite(c.model.expansion) && c.model.expansion > 0.0, "\"model.expansion\" must be > 0");
  need(c.model.k_avg > 0, "\"model.k_avg\" must be > 0");
  need(c.model.eval_batch > 0, "\"model.eval_batch\" must be > 0");
  try {
    validate(c.model.train);
  } catch (const Error& e) {
    fail(Errc::config, std::string("config: train: ") + e.what());
  }
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    need(s.trajectories > 0 && s.timesteps > 0 && s.channels > 0,
         "dataset.synthetic needs trajectories, timesteps and channels > 0");
    need(s.timesteps >= 2, "\"dataset.synthetic.timesteps\" must be >= 2");
    need(s.residual_rank <= s.channels, "\"dataset.synthetic.residual_rank\" must be <= channels");
    need(s.residual_sparsity > 0.0 && s.residual_sparsity <= 1.0,
         "\"dataset.synthetic.residual_sparsity\" must be in (0, 1]");
    need(s.noise_std >= 0.0, "\"dataset.synthetic.noise_std\" must be >= 0");
    need(s.stride > 0, "\"dataset.synthetic.stride\" must be > 0");
    if (s.grid) {
      need(s.grid->tokens() > 0 && s.trajectories % s.grid->tokens() == 0,
           "dataset.synthetic.trajectories must be a multiple of the grid size");
    }
  }
  if (c.dataset_path && check_files) {
    if (!std::filesystem::exists(*c.dataset_path)) {
      fail(Errc::missing_input, "config: dataset file " + *c.dataset_path + " does not exist");
    }
  }
  need(c.steer.mode == "single" || c.steer.mode == "transfer", "\"steer.mode\" must be single or transfer");
  need(std::isfinite(c.steer.alpha), "\"steer.alpha\" must be finite");
  need(c.steer.p > 0, "\"steer.p\" must be > 0");
  need(std::isfinite(c.steer.lambda_src) && std::isfinite(c.steer.lambda_tgt), "steer lambdas must be finite");
  need(c.analysis.images > 0, "\"analysis.images\" must be > 0");
}

}  // namespace tsae
