// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsae/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>

#include "tsae/analysis.hpp"
#include "tsae/binary_io.hpp"
#include "tsae/hash.hpp"
#include "tsae/kernels.hpp"

namespace tsae {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void log(const std::string& msg) { std::cerr << "[tsae] " << msg << '\n'; }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Run {
 public:
  Run(const RunConfig& config, std::string command) : config_(config), command_(std::move(command)) {
    kernels::set_threads(config.threads);
    fs::create_directories(config.out);
  }

  fs::path path(const std::string& name) const { return fs::path(config_.out) / name; }

  std::string input(const std::string& name) {
    const auto p = path(name);
    if (!fs::exists(p)) {
      fail(Errc::missing_input, p.string() + " not found; run the upstream command first");
    }
    const auto h = sha256_file(p.string());
    inputs_[name] = h;
    return h;
  }
  void external_input(const std::string& label, const std::string& file) {
    inputs_[label] = sha256_file(file);
  }

  void write(const std::string& name, const std::vector<unsigned char>& bytes) {
    const auto p = path(name);
    fs::create_directories(p.parent_path());
    io::write_file(p.string(), bytes);
    outputs_[name] = sha256_hex(bytes);
  }
  void write(const std::string& name, const std::string& text) {
    write(name, std::vector<unsigned char>(text.begin(), text.end()));
  }

  void finish() const {
    json m;
    m["command"] = command_;
    m["tool_version"] = kToolVersion;
    m["config_hash"] = config_hash(config_);
    m["config"] = to_json(config_);
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["threads"] = kernels::max_threads();
    m["created_utc"] = utc_timestamp();
    io::write_text(path("manifest_" + command_ + ".json").string(), m.dump(2) + "\n");
    log(command_ + ": wrote " + std::to_string(outputs_.size()) + " artifact(s) to " + config_.out);
  }

 private:
  const RunConfig& config_;
  std::string command_;
  std::map<std::string, std::string> inputs_, outputs_;
};

TrajectoryDataset load_split(Run& run, const char* name) {
  run.input(name);
  return load_trajectories(run.path(name).string());
}

RidgeArtifact load_checked_ridge(Run& run, const std::string& train_hash) {
  run.input(artifacts::ridge);
  auto ridge = load_ridge(run.path(artifacts::ridge).string());
  require(ridge.source_hash == train_hash, Errc::hash_mismatch,
          std::string(artifacts::ridge) + " was fitted on a different " + artifacts::train + " (" +
              ridge.source_hash + " vs " + train_hash + "); re-run fit-ridge");
  return ridge;
}

ModelBundle load_run_bundle(Run& run) {
  run.input(artifacts::model);
  run.input(artifacts::ridge);
  return load_bundle(run.path(artifacts::model).string(), run.path(artifacts::ridge).string());
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<std::uint32_t> image_rows(std::size_t image, std::size_t tokens) {
  std::vector<std::uint32_t> rows(tokens);
  for (std::size_t s = 0; s < tokens; ++s) rows[s] = static_cast<std::uint32_t>(image * tokens + s);
  return rows;
}

std::size_t default_total_steps(const RunConfig& c, const TrajectoryDataset& ds) {
  if (c.steer.total_steps > 0) return c.steer.total_steps;
  return std::size_t{ds.meta().full_step_indices.back()} + ds.meta().stride;
}

}  // namespace

std::string config_hash(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

void cmd_synth(const RunConfig& c) {
  Run run(c, "synth");
  std::optional<TrajectoryDataset> ds;
  if (c.synthetic) {
    log("generating " + std::to_string(c.synthetic->trajectories) + " synthetic trajectories");
    ds = generate_synthetic(*c.synthetic).dataset;
  } else {
    run.external_input("dataset", *c.dataset_path);
    ds = load_trajectories(*c.dataset_path);
  }
  const auto parts = split(*ds, c.val_fraction, c.seed);
  run.write(artifacts::train, encode_trajectories(parts.train));
  run.write(artifacts::val, encode_trajectories(parts.val));
  run.finish();
}

void cmd_fit_ridge(const RunConfig& c) {
  Run run(c, "fit-ridge");
  const auto train_hash = run.input(artifacts::train);
  const auto train = load_trajectories(run.path(artifacts::train).string());
  const auto val = load_split(run, artifacts::val);
  RidgeArtifact art;
  art.normalizer = fit_normalizer(train.data());
  art.chain = fit_ridge(apply_norm(art.normalizer, train.data()), c.ridge_lambda);
  art.source_hash = train_hash;
  const auto ev = ridge_ev_diagnostic(apply_norm(art.normalizer, val.data()), art.chain);
  std::string csv = "transition,from_step,to_step,ev\n";
  const auto& steps = val.meta().full_step_indices;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    csv += std::to_string(i + 1) + "," + std::to_string(steps[i]) + "," + std::to_string(steps[i + 1]) + "," +
           (ev[i] ? format_double(*ev[i]) : std::string("undefined")) + "\n";
  }
  run.write(artifacts::ridge, encode_ridge(art));
  run.write(artifacts::ridge_ev, csv);
  run.finish();
}

void cmd_train(const RunConfig& c) {
  Run run(c, "train");
  const auto train_hash = run.input(artifacts::train);
  const auto train = load_trajectories(run.path(artifacts::train).string());
  const auto val = load_split(run, artifacts::val);
  const auto ridge = load_checked_ridge(run, train_hash);
  log("training " + c.model.variant.name() + " (k_avg=" + std::to_string(c.model.k_avg) + ")");
  const auto trained = train_bundle(train.data(), val.data(), ridge.normalizer, &ridge.chain, c.model);
  json hist = json::array();
  for (std::size_t s = 0; s < trained.runs.size(); ++s) {
    const auto& r = trained.runs[s];
    json epochs = json::array();
    for (const auto& e : r.history) {
      epochs.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_ev", e.val_ev},
                        {"dead_latents", e.dead_latents}});
    }
    hist.push_back({{"sae", s}, {"best_epoch", r.best_epoch}, {"epochs", epochs}});
  }
  run.write(artifacts::model, encode_checkpoint(trained.bundle, sha256_file(run.path(artifacts::ridge).string())));
  run.write(artifacts::history, dump(hist));
  run.finish();
}

void cmd_eval(const RunConfig& c) {
  Run run(c, "eval");
  const auto bundle = load_run_bundle(run);
  const auto val = load_split(run, artifacts::val);
  const auto report = evaluate(bundle, val.data());
  log("eval " + report.variant + ": mse=" + format_double(report.mse) +
      " ev=" + (report.ev ? format_double(*report.ev) : std::string("undefined")));
  json per = json::array();
  for (std::size_t i = 0; i < report.ev_per_timestep.size(); ++i) {
    per.push_back({{"timestep", i}, {"mse", report.mse_per_timestep[i]}, {"ev", opt_json(report.ev_per_timestep[i])}});
  }
  const json j = {{"variant", report.variant},       {"protocol", report.protocol},
                  {"k_avg", bundle.k_avg},           {"expansion", bundle.expansion},
                  {"trajectory_budget", report.trajectory_budget},
                  {"mse", report.mse},               {"ev", opt_json(report.ev)},
                  {"per_timestep", per}};
  run.write(artifacts::eval_csv, report_csv({{report, &bundle}}));
  run.write(artifacts::eval_json, dump(j));
  run.finish();
}

void cmd_analyze(const RunConfig& c) {
  Run run(c, "analyze");
  const auto bundle = load_run_bundle(run);
  const auto val = load_split(run, artifacts::val);
  const std::size_t m = bundle.saes.front().latents();
  std::vector<std::size_t> latents = c.analysis.latents;
  if (latents.empty()) {
    for (std::size_t k = 0; k < m; ++k) latents.push_back(k);
  }
  const bool spatial = val.grid().has_value() && val.grid()->tokens() >= 2;
  const std::size_t tokens = val.grid() ? val.grid()->tokens() : 1;
  const std::size_t images = std::min(c.analysis.images, val.images());
  const auto codes = encode_codes(bundle, val.data());
  const std::string dir = artifacts::analysis_dir;

  json records = json::array();
  struct GroupStats {
    std::size_t count = 0;
    double self_sim = 0.0;
    std::vector<double> entropy_sum;
    std::vector<std::size_t> entropy_n;
  };
  std::map<std::string, GroupStats> groups;
  std::size_t maps_written = 0;
  for (auto k : latents) {
    const auto traj = decoder_to_activation_space(bundle, k);
    const auto prof = temporal_profile(traj);
    json rec;
    rec["latent"] = k;
    std::vector<double> norms;
    for (Eigen::Index i = 0; i < traj.phi.rows(); ++i) norms.push_back(traj.phi.row(i).norm());
    rec["norms"] = norms;
    const std::string group = prof && prof->group ? to_string(*prof->group) : "none";
    rec["profile"] = prof ? json(prof->p) : json(nullptr);
    rec["group"] = group;
    const bool multi = traj.timesteps() >= 2;
    const double ss = multi ? self_similarity(traj) : 0.0;
    rec["self_similarity"] = multi ? json(ss) : json(nullptr);
    const Matrix sim = similarity_matrix(traj);
    json sim_rows = json::array();
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      sim_rows.push_back(std::vector<double>(sim.row(i).begin(), sim.row(i).end()));
    }
    rec["similarity_matrix"] = sim_rows;

    auto& g = groups[group];
    g.count += 1;
    g.self_sim += ss;
    g.entropy_sum.resize(traj.timesteps(), 0.0);
    g.entropy_n.resize(traj.timesteps(), 0);
    if (spatial) {
      json ent = json::array();
      const bool dump_maps = maps_written < c.analysis.map_latents;
      for (std::size_t i = 0; i < traj.timesteps(); ++i) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t img = 0; img < images; ++img) {
          const Matrix map = spatial_cosine_map(traj, val, img, i);
          if (const auto h = positive_spatial_entropy(map)) {
            sum += *h;
            ++n;
          }
          if (dump_maps && img == 0) {
            run.write(dir + "/maps/latent" + std::to_string(k) + "_t" + std::to_string(i) + ".pgm", encode_pgm(map));
          }
        }
        ent.push_back(n ? json(sum / static_cast<double>(n)) : json(nullptr));
        if (n) {
          g.entropy_sum[i] += sum / static_cast<double>(n);
          g.entropy_n[i] += 1;
        }
      }
      if (dump_maps) ++maps_written;
      rec["positive_spatial_entropy"] = ent;
    }
    json top = json::array();
    for (const auto& s : top_activating_samples(codes, k, c.analysis.top_samples, tokens)) {
      top.push_back({{"image", s.image}, {"token", s.token}, {"timestep", s.timestep}, {"score", s.score}});
    }
    rec["top_samples"] = top;
    records.push_back(rec);
  }

  std::string csv = "group,count,mean_self_similarity";
  const std::size_t t = bundle.timesteps();
  for (std::size_t i = 0; i < t; ++i) csv += ",entropy_t" + std::to_string(i);
  csv += "\n";
  for (const auto& [name, g] : groups) {
    csv += name + "," + std::to_string(g.count) + "," + format_double(g.self_sim / static_cast<double>(g.count));
    for (std::size_t i = 0; i < t; ++i) {
      csv += ",";
      csv += (i < g.entropy_n.size() && g.entropy_n[i]) ? format_double(g.entropy_sum[i] / static_cast<double>(g.entropy_n[i]))
                                                         : std::string("undefined");
    }
    csv += "\n";
  }
  run.write(dir + "/latents.json", dump(records));
  run.write(dir + "/groups.csv", csv);
  run.finish();
}

void cmd_steer(const RunConfig& c) {
  Run run(c, "steer");
  const auto bundle = load_run_bundle(run);
  const auto val = load_split(run, artifacts::val);
  const auto& sc = c.steer;
  const std::size_t total = default_total_steps(c, val);
  const auto& steps = val.meta().full_step_indices;
  const TokenMask mask = sc.mask ? TokenMask::of(*sc.mask) : TokenMask::all();

  SteeringPlan plan;
  if (sc.mode == "single") {
    plan = single_feature_plan(decoder_to_activation_space(bundle, sc.latent), mask, sc.alpha, steps, total);
  } else {
    const std::size_t s = val.grid() ? val.grid()->tokens() : 1;
    require(sc.source_image < val.images() && sc.target_image < val.images(), Errc::config,
            "steer.source_image/target_image out of range (" + std::to_string(val.images()) + " images)");
    const auto codes = encode_codes(bundle, val.data());
    auto rows_of = [&](std::size_t image, const std::vector<std::uint32_t>& local) {
      std::vector<std::uint32_t> rows;
      for (auto tok : local.empty() ? image_rows(0, s) : local) {
        require(tok < s, Errc::config, "steer mask token " + std::to_string(tok) + " outside the grid");
        rows.push_back(static_cast<std::uint32_t>(image * s + tok));
      }
      return rows;
    };
    const auto rows_src = rows_of(sc.source_image, sc.mask_src);
    const auto rows_tgt = rows_of(sc.target_image, sc.mask_tgt);
    auto sel = masked_contrast_select(codes.front(), codes.front(), rows_src, rows_tgt, sc.p);
    sel.lambda_src = sc.lambda_src;
    sel.lambda_tgt = sc.lambda_tgt;
    std::vector<std::vector<double>> block_src, block_tgt;
    for (const auto& block_codes : codes) {
      block_src.push_back(masked_mean(block_codes, rows_src));
      block_tgt.push_back(masked_mean(block_codes, rows_tgt));
    }
    std::map<std::size_t, DecoderTrajectory> src, tgt;
    for (auto k : sel.features) {
      const auto base = decoder_to_activation_space(bundle, k);
      DecoderTrajectory ts = base, tt = base;
      for (std::size_t i = 0; i < base.timesteps(); ++i) {
        const std::size_t b = codes.size() == 1 ? 0 : i;
        const double cs = block_src[b][k];
        const double ct = block_tgt[b][k];
        ts.phi.row(static_cast<Eigen::Index>(i)) *= cs;
        tt.phi.row(static_cast<Eigen::Index>(i)) *= ct;
      }
      src.emplace(k, std::move(ts));
      tgt.emplace(k, std::move(tt));
    }
    const Matrix v = transfer_direction(sel, src, tgt);
    plan.directions = expand_piecewise_constant(v, steps, total);
    plan.masks.assign(total, mask);
    plan.alpha = sc.alpha;
    plan.full_step_indices = steps;
    validate(plan);
    json j = {{"features", sel.features}, {"scores", sel.scores},     {"mean_src", sel.mean_src},
              {"mean_tgt", sel.mean_tgt}, {"lambda_src", sel.lambda_src}, {"lambda_tgt", sel.lambda_tgt},
              {"p", sel.p}};
    run.write(artifacts::selection, dump(j));
  }
  run.write(artifacts::plan, encode_plan(plan));
  if (sc.apply) run.write(artifacts::steered, encode_trajectories(steer_dataset(val, plan)));
  run.finish();
}

std::string cmd_inspect(const std::string& path) {
  const auto bytes = io::read_file(path);
  require(bytes.size() >= 4, Errc::truncated, path + ": too short to be a tsae artifact");
  const std::string magic(bytes.begin(), bytes.begin() + 4);
  json j;
  j["path"] = path;
  j["sha256"] = sha256_hex(bytes);
  if (magic == "TSAE") {
    const auto ds = decode_trajectories(bytes, path);
    j["kind"] = "trajectories";
    j["trajectories"] = ds.trajectories();
    j["timesteps"] = ds.timesteps();
    j["channels"] = ds.channels();
    j["images"] = ds.images();
    j["grid"] = ds.grid() ? json{ds.grid()->height, ds.grid()->width} : json(nullptr);
    j["stride"] = ds.meta().stride;
    j["full_step_indices"] = ds.meta().full_step_indices;
  } else if (magic == "TSRG") {
    const auto r = decode_ridge(bytes, path);
    j["kind"] = "ridge";
    j["timesteps"] = r.chain.timesteps();
    j["channels"] = r.normalizer.width();
    j["lambda"] = r.chain.lambda;
    j["source_hash"] = r.source_hash;
  } else if (magic == "TSCK") {
    const auto ck = decode_checkpoint(bytes, path);
    const auto& b = ck.bundle;
    j["kind"] = "checkpoint";
    j["variant"] = b.variant.name();
    j["protocol"] = to_string(b.protocol);
    j["k_avg"] = b.k_avg;
    j["expansion"] = b.expansion;
    j["saes"] = b.saes.size();
    j["latents"] = b.saes.empty() ? 0 : b.saes.front().latents();
    j["ridge_hash"] = ck.ridge_hash;
  } else if (magic == "TSPL") {
    const auto p = decode_plan(bytes, path);
    j["kind"] = "plan";
    j["steps"] = p.steps();
    j["width"] = p.width();
    j["alpha"] = p.alpha;
    j["full_step_indices"] = p.full_step_indices;
  } else {
    fail(Errc::bad_magic, path + ": unrecognized artifact magic");
  }
  return j.dump(2);
}

}  // namespace tsae
