#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elastofuse/training.hpp"

namespace elastofuse::cli {

// Exit codes are part of the CLI contract.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;   // bad flags, bad config file, unknown keys
constexpr int kExitData = 3;     // bad manifests, images, splits, predictions
constexpr int kExitRuntime = 4;  // model/checkpoint/unexpected failures

/// Declarative run configuration. File values are overridden by environment
/// (weights dir), then flags. Unknown keys in the file are rejected.
struct RunConfig {
  // data
  std::string manifest_path;
  std::string split_path;
  double test_fraction = 0.25;

  // model
  training::ModelSpec model;

  // train
  training::TrainConfig train;

  // eval
  std::vector<std::string> report_formats = {"csv", "json"};

  // io
  std::string run_dir;
  std::string weights_dir;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
};

/// Dispatches one of: synth, split, train, eval, gradcam, report, compare.
/// Returns a stable exit code; never throws.
int run_command(const std::vector<std::string>& args);

}  // namespace elastofuse::cli
