#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "radpose/calib_metrics.hpp"
#include "radpose/latent_activity.hpp"
#include "radpose/scatter_sim.hpp"
#include "radpose/trainer.hpp"

namespace radpose {

// Everything a pipeline run can be configured with. Loaded from a flat
// `key = value` file; '#' starts a comment. Unknown keys are a config error.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string split = "train=0,1,2,3;calib=4;test=5";

  RadarParams radar = RadarParams::defaults();
  SimulationPlan sim;
  TrainConfig train;  // train.model holds the model settings
  std::uint64_t eval_seed = 1;
  std::size_t calib_levels = 1000;  // isotonic fit grid size, placed at PIT quantiles
  ReportOptions report;

  std::size_t aug_samples = 100;
  double aug_alpha = 0.0129;  // 0 takes the alpha learned by the model
  double aug_half_width = 0.01;
  std::size_t aug_extra = 10;
  ClassifierConfig classifier;

  // Applies one key; throws kConfig naming the key when unknown or malformed.
  void set(const std::string& key, const std::string& value);
  // Checks cross-field consistency; kConfig on failure.
  void validate() const;

  // Effective configuration, one `key = value` per line, sorted by key.
  std::map<std::string, std::string> entries() const;
  std::string dump() const;

  static RunConfig load(const std::filesystem::path& path);
  // Parses file contents; `origin` names the source in messages.
  static RunConfig parse(const std::string& text, const std::string& origin = "config");
};

}  // namespace radpose
