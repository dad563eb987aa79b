// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "tsae/commands.hpp"
#include "tsae/config.hpp"

using namespace tsae;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json toy(const fs::path& out) {
  json j = json::parse(R"({
    "dataset": {"synthetic": {"trajectories": 4, "timesteps": 5, "channels": 20, "residual_rank": 4,
                              "residual_sparsity": 0.5, "noise_std": 0.01}},
    "val_fraction": 0.25,
    "train": {"epochs": 2}
  })");
  j["out"] = out.string();
  return j;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("tsae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

int run_cli(const std::string& args) {
  const std::string line = std::string("\"") + TSAE_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c = parse_config(toy("x"));
  EXPECT_EQ(c.model.k_avg, 50u);
  EXPECT_EQ(c.model.expansion, 0.5);
  EXPECT_EQ(c.synthetic->stride, 10u);
  EXPECT_EQ(c.ridge_lambda, 0.1);
  EXPECT_EQ(c.steer.alpha, 10.0);
  EXPECT_EQ(c.steer.p, 50u);
  EXPECT_EQ(c.model.variant.name(), "resid_concat");
}

TEST(Config, RoundTrip) {
  json j = toy("somewhere");
  j["model"] = {{"variant", "resid_noconcat"}, {"protocol", "per_timestep_matched"}, {"k_avg", 10}};
  j["steer"] = {{"mode", "transfer"}, {"mask", {3, 1}}, {"lambda_src", 0.5}};
  j["analysis"] = {{"latents", {1, 2}}};
  j["seed"] = 9;
  const RunConfig c = parse_config(j);
  const json full = to_json(c);
  EXPECT_EQ(to_json(parse_config(full)), full);
  EXPECT_EQ(config_hash(parse_config(full)), config_hash(c));
  EXPECT_EQ(c.steer.mask, (std::vector<std::uint32_t>{1, 3}));
}

TEST(Config, RejectsInvalidFields) {
  json j = toy("x");
  j["model"] = {{"k_avg", 50}, {"typo", 1}};
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["extra"] = true;
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["model"] = {{"expansion", 0.0}};
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["model"] = {{"variant", "concat"}};
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["dataset"]["path"] = "a.tsae";
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["dataset"] = json::object();
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["train"] = {{"learning_rate", -1.0}};
  EXPECT_ERRC(parse_config(j), Errc::config);
  j = toy("x");
  j["dataset"] = {{"path", "/nonexistent/file.tsae"}};
  EXPECT_NO_THROW(parse_config(j));
  EXPECT_ERRC(parse_config(j, true), Errc::missing_input);
}

TEST_F(TempDir, ToyPipelineChainsByHash) {
  const RunConfig c = parse_config(toy(dir));
  cmd_synth(c);
  cmd_fit_ridge(c);
  cmd_train(c);
  cmd_eval(c);
  cmd_analyze(c);
  cmd_steer(c);
  auto m = [&](const char* cmd) { return read_json(dir / (std::string("manifest_") + cmd + ".json")); };
  const json synth = m("synth"), ridge = m("fit-ridge"), train = m("train"), eval = m("eval"),
             analyze = m("analyze"), steer = m("steer");
  EXPECT_EQ(ridge["inputs"]["train.tsae"], synth["outputs"]["train.tsae"]);
  EXPECT_EQ(train["inputs"]["ridge.ridge"], ridge["outputs"]["ridge.ridge"]);
  EXPECT_EQ(train["inputs"]["train.tsae"], synth["outputs"]["train.tsae"]);
  EXPECT_EQ(train["inputs"]["val.tsae"], synth["outputs"]["val.tsae"]);
  for (const json* x : {&eval, &analyze, &steer}) {
    EXPECT_EQ((*x)["inputs"]["model.ckpt"], train["outputs"]["model.ckpt"]);
    EXPECT_EQ((*x)["inputs"]["ridge.ridge"], ridge["outputs"]["ridge.ridge"]);
  }
  for (const json* x : {&synth, &ridge, &train, &eval, &analyze, &steer}) {
    EXPECT_EQ((*x)["config_hash"], config_hash(c));
    EXPECT_EQ((*x)["tool_version"], kToolVersion);
  }
  EXPECT_EQ(eval["config"]["model"]["k_avg"], 50);
  EXPECT_EQ(eval["config"]["model"]["expansion"], 0.5);
  EXPECT_EQ(eval["config"]["dataset"]["synthetic"]["stride"], 10);
  const json report = read_json(dir / "eval.json");
  EXPECT_FALSE(report.empty());
  EXPECT_TRUE(fs::exists(dir / "analysis" / "latents.json"));
  EXPECT_TRUE(fs::exists(dir / "plan.tspl"));
  EXPECT_TRUE(fs::exists(dir / "steered.tsae"));
  EXPECT_EQ(json::parse(cmd_inspect((dir / "model.ckpt").string()))["kind"], "checkpoint");
}

TEST_F(TempDir, RerunIsByteIdentical) {
  RunConfig c = parse_config(toy(dir / "a"));
  for (int pass = 0; pass < 2; ++pass) {
    cmd_synth(c);
    cmd_fit_ridge(c);
    cmd_train(c);
    cmd_eval(c);
    c.out = (dir / "b").string();
  }
  for (const char* f : {"train.tsae", "ridge.ridge", "model.ckpt", "eval.csv", "eval.json", "history.json"}) {
    std::ifstream a(dir / "a" / f, std::ios::binary), b(dir / "b" / f, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb) << f;
  }
}

TEST_F(TempDir, MissingInputAndHashMismatch) {
  RunConfig c = parse_config(toy(dir));
  EXPECT_ERRC(cmd_fit_ridge(c), Errc::missing_input);
  EXPECT_ERRC(cmd_eval(c), Errc::missing_input);
  cmd_synth(c);
  cmd_fit_ridge(c);
  c.synthetic->seed += 1;
  cmd_synth(c);
  EXPECT_ERRC(cmd_train(c), Errc::hash_mismatch);
  cmd_fit_ridge(c);
  cmd_train(c);
  c.ridge_lambda = 0.5;
  cmd_fit_ridge(c);
  EXPECT_ERRC(cmd_eval(c), Errc::hash_mismatch);
}

TEST_F(TempDir, ExitCodes) {
  const fs::path cfg = dir / "run.json";
  const auto write = [&](const json& j) { std::ofstream(cfg) << j.dump(); };
  EXPECT_EQ(run_cli(""), 64);
  EXPECT_EQ(run_cli("train"), 64);
  EXPECT_EQ(run_cli("frobnicate --config x"), 64);
  EXPECT_EQ(run_cli("train --config " + (dir / "none.json").string()),
            static_cast<int>(Errc::missing_input));
  json bad = toy(dir);
  bad["bogus"] = 1;
  write(bad);
  EXPECT_EQ(run_cli("synth --config " + cfg.string()), static_cast<int>(Errc::config));
  write(toy(dir));
  EXPECT_EQ(run_cli("eval --config " + cfg.string()), static_cast<int>(Errc::missing_input));
  EXPECT_EQ(run_cli("synth --config " + cfg.string() + " --threads 2"), 0);
  EXPECT_EQ(run_cli("inspect " + (dir / "train.tsae").string()), 0);
  EXPECT_EQ(run_cli("inspect " + cfg.string()), static_cast<int>(Errc::bad_magic));
}
