// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "distillab/distill.hpp"
#include "distillab/priors.hpp"
#include "distillab/scene.hpp"

namespace distillab {

/// Bad configuration or unusable inputs; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScheduleParams {
  int train_steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 2e-2;
};

struct ExperimentConfig {
  /// Master seed. Scene (unless scene_seed is set), held-out cameras, prior
  /// and distillation streams all derive from it.
  std::uint64_t seed = 0;
  std::string run_id = "run";
  std::filesystem::path output_dir = "runs/default";
  bool dump_images = false;

  std::filesystem::path scene_path;
  std::optional<std::uint64_t> scene_seed;
  int gt_resolution = 64;

  GridParams grid;
  int holdout_count = 8;
  int field_resolution = 48;
  ScheduleParams schedule;
  RenderConfig render;

  /// "oracle" or "toy".
  std::string prior = "oracle";
  OracleConfig oracle;
  std::filesystem::path prior_weights;

  DistillConfig distill = DistillConfig::desk();

  /// Throws ConfigError on invalid values or unreadable inputs.
  void validate() const;
  std::uint64_t effective_scene_seed() const { return scene_seed.value_or(seed); }
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict: unknown keys raise ConfigError. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" to a config document. The value is parsed as JSON
/// when possible and taken as a string otherwise. The path must exist.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct RunReport {
  std::string run_id;
  Strategy strategy = Strategy::kProgressive;
  std::uint64_t seed = 0;
  double cfg_scale = 0.0;
  double stage1_fraction = 0.0;
  Metrics metrics;
  long iterations = 0;
  double seconds = 0.0;
  std::vector<HistoryRow> history;
  /// Mean high-frequency energy of the training-view ground truth at the
  /// final rung, for comparison with the target_hf history column.
  double gt_hf = 0.0;
};

/// Column order of metrics.csv. Wall-clock time goes to timing.csv so that
/// metrics.csv depends only on the config.
inline constexpr const char* kMetricsHeader =
    "run_id,strategy,seed,cfg_scale,stage1_fraction,psnr,ssim,mse,perceptual,leakage,iterations";
inline constexpr const char* kHistoryHeader = "phase,step,t,resolution,iteration,loss,target_hf,heldout_mse";

std::string metrics_row(const RunReport& report);

/// Bakes the scene, builds the prior, distills, evaluates and writes
/// metrics.csv, timing.csv, history.csv, config.json, field.bin and held-out
/// renders into cfg.output_dir.
RunReport run_experiment(const ExperimentConfig& cfg);

struct SweepSpec {
  ExperimentConfig base;
  /// cfg_scale, stage1_fraction or strategy.
  std::string axis = "stage1_fraction";
  std::vector<nlohmann::json> values;
  std::vector<std::uint64_t> seeds{0};

  void validate() const;
};

std::vector<nlohmann::json> default_sweep_values(const std::string& axis);

struct SweepRow {
  nlohmann::json value;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunReport report;
};

/// Runs values x seeds, up to `workers` runs at a time, each in its own
/// subdirectory. Writes runs.csv (one row per run, failures marked) and
/// sweep.csv (mean and standard deviation per value).
std::vector<SweepRow> run_sweep(const SweepSpec& sweep, int workers);

/// Entry point of the command-line tool. Returns the process exit code.
int cli(int argc, const char* const* argv);

}  // namespace distillab
