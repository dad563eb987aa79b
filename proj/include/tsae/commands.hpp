// Copyright 2026 The tsae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "tsae/config.hpp"

namespace tsae {

inline constexpr const char* kToolVersion = "0.1.0";

/// Fixed artifact names inside the run directory.
namespace artifacts {
inline constexpr const char* train = "train.tsae";
inline constexpr const char* val = "val.tsae";
inline constexpr const char* ridge = "ridge.ridge";
inline constexpr const char* ridge_ev = "ridge_ev.csv";
inline constexpr const char* model = "model.ckpt";
inline constexpr const char* history = "history.json";
inline constexpr const char* eval_csv = "eval.csv";
inline constexpr const char* eval_json = "eval.json";
inline constexpr const char* analysis_dir = "analysis";
inline constexpr const char* plan = "plan.tspl";
inline constexpr const char* steered = "steered.tsae";
inline constexpr const char* selection = "transfer.json";
}  // namespace artifacts

/// Each command reads its inputs from and writes its outputs to
/// config.out, plus a manifest_<command>.json with the config hash and the
/// SHA-256 of every input and output.
void cmd_synth(const RunConfig& config);
void cmd_fit_ridge(const RunConfig& config);
void cmd_train(const RunConfig& config);
void cmd_eval(const RunConfig& config);
void cmd_analyze(const RunConfig& config);
void cmd_steer(const RunConfig& config);

/// JSON summary of any tsae artifact (.tsae, .ridge, checkpoint, plan).
std::string cmd_inspect(const std::string& path);

/// sha256 of the canonical config JSON.
std::string config_hash(const RunConfig& config);

}  // namespace tsae
