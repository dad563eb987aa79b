// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsae/pipeline.hpp"
#include "tsae/steering.hpp"

namespace tsae {

struct AnalysisConfig {
  std::vector<std::size_t> latents;  // empty: every latent
  std::size_t images = 8;            // validation images used for entropy and maps
  std::size_t top_samples = 10;
  std::size_t map_latents = 4;       // latents with PGM dumps
};

struct SteerConfig {
  std::string mode = "single";  // "single" or "transfer"
  std::size_t latent = 0;
  double alpha = kDefaultTransferAlpha;
  std::optional<std::vector<std::uint32_t>> mask;  // nullopt: global
  std::size_t total_steps = 0;                     // 0: last full-step index + stride
  std::size_t source_image = 0;
  std::size_t target_image = 1;
  std::vector<std::uint32_t> mask_src;             // empty: whole image
  std::vector<std::uint32_t> mask_tgt;
  std::size_t p = kDefaultTransferTopP;
  double lambda_src = 1.0;
  double lambda_tgt = 1.0;
  bool apply = true;                               // also write a steered copy of val.tsae
};

/// Declarative run description. Exactly one dataset source: a synthetic
/// spec or a .tsae path.
struct RunConfig {
  std::uint64_t seed = 43;
  std::string out = "run";
  int threads = 0;  // 0: OpenMP default
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::string> dataset_path;
  double val_fraction = 0.05;
  double ridge_lambda = kDefaultRidgeLambda;
  VariantConfig model;
  AnalysisConfig analysis;
  SteerConfig steer;
};

/// Parses and validates; throws Errc::config with the offending field.
/// `check_files` also requires a dataset path to exist.
RunConfig parse_config(const nlohmann::json& j, bool check_files = false);
RunConfig load_config(const std::string& path, bool check_files = false);

/// Full config with every default filled in; parse_config(to_json(c))
/// reproduces c.
nlohmann::json to_json(const RunConfig& config);

void validate(const RunConfig& config, bool check_files = false);

}  // namespace tsae
