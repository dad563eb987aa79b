// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tsae/commands.hpp"

namespace {

constexpr int kUsageExit = 64;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

tsae::RunConfig resolve(const Flags& f) {
  auto c = tsae::load_config(f.config, true);
  if (f.seed) {
    c.seed = *f.seed;
    c.model.train.seed = *f.seed;
    if (c.synthetic) c.synthetic->seed = *f.seed;
  }
  if (f.out) c.out = *f.out;
  if (f.threads) c.threads = *f.threads;
  tsae::validate(c, true);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residualized temporal sparse autoencoders over activation trajectories"};
  app.require_subcommand(1);
  Flags flags;
  std::string inspect_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "run config (JSON)")->required();
    sub->add_option("--seed", flags.seed, "override every seed in the config");
    sub->add_option("--out", flags.out, "override the run directory");
    sub->add_option("--threads", flags.threads, "OpenMP threads (0 = default)")->check(CLI::NonNegativeNumber);
  };
  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(const tsae::RunConfig&);
  };
  const Entry entries[] = {
      {"synth", "generate or import a dataset and write train/val .tsae", tsae::cmd_synth},
      {"fit-ridge", "fit normalizer and ridge chain on train.tsae", tsae::cmd_fit_ridge},
      {"train", "train the configured SAE variant", tsae::cmd_train},
      {"eval", "teacher-forced reconstruction metrics on val.tsae", tsae::cmd_eval},
      {"analyze", "per-latent temporal and spatial analysis", tsae::cmd_analyze},
      {"steer", "build a steering plan and apply it to val.tsae", tsae::cmd_steer},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    subs.emplace_back(sub, &e);
  }
  auto* inspect = app.add_subcommand("inspect", "print a JSON summary of a tsae artifact");
  inspect->add_option("path", inspect_path, "artifact file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  try {
    if (inspect->parsed()) {
      std::cout << tsae::cmd_inspect(inspect_path) << '\n';
      return 0;
    }
    for (const auto& [sub, entry] : subs) {
      if (sub->parsed()) entry->fn(resolve(flags));
    }
  } catch (const tsae::Error& e) {
    std::cerr << "tsae: error [" << tsae::errc_name(e.code()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "tsae: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
