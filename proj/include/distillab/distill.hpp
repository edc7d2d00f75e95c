// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distillab/camera.hpp"
#include "distillab/diffusion.hpp"
#include "distillab/field.hpp"
#include "distillab/image.hpp"

namespace distillab {

enum class Strategy { kProgressive, kStage1Only, kStage2Only, kSds };

std::string to_string(Strategy s);
/// Accepts progressive, stage1_only, stage2_only and sds.
Strategy parse_strategy(std::string_view name);

struct SdsOptions {
  double t_min_frac = 0.02;
  double t_max_frac = 0.5;
  /// Linearly move t_max_frac down to t_min_frac over the run.
  bool anneal_tmax = false;
  int iterations = 600;
  /// Full views rendered per iteration.
  int views_per_iteration = 4;
  /// Held-out probe interval, in iterations.
  int checkpoint_every = 20;
};

struct DistillConfig {
  Strategy strategy = Strategy::kProgressive;
  /// DDIM ladder length K.
  int ddim_steps = 100;
  double stage1_fraction = 0.6;
  /// Field iterations per Stage-1 target refresh (N).
  int iterations_per_refresh = 130;
  double cfg_scale = 19.0;
  /// Optional separate guidance for the Stage-2 DDIM pass.
  std::optional<double> stage2_cfg_scale;
  /// Stage-2 iteration cap; negative means 20 * N.
  int stage2_budget = -1;
  int plateau_window = 200;
  double plateau_tolerance = 1e-4;
  int patch_count = 16;
  int patch_size = 32;
  /// Square target resolutions, coarse to fine.
  std::vector<int> resolution_ladder{32, 64};
  /// Ladder step index (as a fraction of K) where the next rung begins.
  /// Stage 2 always runs on the last rung.
  double ladder_advance_fraction = 0.6;
  double learning_rate = 1e-2;
  double perceptual_weight = 1.0;
  /// Initial density of the optimized field; color starts at gray.
  double init_sigma = 0.01;
  SdsOptions sds;
  /// Draw fresh per-view noise at every Stage-1 refresh.
  bool resample_noise = false;
  /// Experimental: continue the previous refresh's latent with a DDIM step
  /// instead of re-noising the current render.
  bool continue_latent = false;
  std::uint64_t seed = 0;

  /// Desk-scale settings: K = 20, N = 30.
  static DistillConfig desk();

  /// Number of Stage-1 refreshes for the configured strategy.
  int stage1_steps() const;
  int stage2_iterations() const;
  bool has_stage2() const;
  /// Index into resolution_ladder used for the given ladder step.
  std::size_t rung_for_step(int step) const;
  void validate() const;
};

struct TargetSet {
  std::vector<Image> targets;
  /// Ladder timestep each target was generated at.
  std::vector<int> timesteps;

  std::size_t size() const { return targets.size(); }
  /// FNV-1a over all target values.
  std::uint64_t hash() const;
};

struct ReconLoss {
  double value = 0.0;
  std::vector<Image> grads;
};

/// Mean over pairs of mean|x - y| + perceptual_weight * perceptual_dist(x, y),
/// with exact gradients w.r.t. the renders. Zero differences contribute zero
/// L1 gradient.
ReconLoss loss_recon(std::span<const Image> renders, std::span<const Image> targets, double perceptual_weight = 1.0);

/// Fixed per-view Gaussian noise images for one resolution.
std::vector<Image> view_noise(std::size_t views, int width, int height, std::uint64_t seed, std::uint64_t round = 0);

/// Renders every camera, noises the render to t with eps_set, and takes one
/// guided denoising step to the clean estimate.
TargetSet refresh_targets_single_step(const VoxelField& field, std::span<const Camera> cameras,
                                      const DenoiserPrior& prior, int t, const NoiseSchedule& sched,
                                      double cfg_scale, std::span<const Image> eps_set, const RenderConfig& render);

struct HistoryRow {
  std::string phase;
  /// Refresh index in Stage 1, checkpoint index elsewhere.
  int step = 0;
  int t = 0;
  int resolution = 0;
  /// Total field iterations so far.
  long iteration = 0;
  /// Mean reconstruction loss over the block ending here.
  double loss = 0.0;
  /// Mean high-frequency energy of the current targets (NaN if none).
  double target_hf = 0.0;
  /// Held-out mse from the probe (NaN if no probe).
  double heldout_mse = 0.0;
};

/// Everything a distillation run reads besides its config.
struct DistillContext {
  /// Training cameras; their resolution is replaced by the current rung.
  std::vector<Camera> cameras;
  const DenoiserPrior* prior = nullptr;
  NoiseSchedule sched;
  RenderConfig render;
  /// Optional held-out mse probe evaluated at refreshes and checkpoints.
  std::function<double(const VoxelField&)> probe;
  /// Optional progress sink.
  std::function<void(const HistoryRow&)> progress;
  /// Optional observer for generated target sets (tag, targets).
  std::function<void(const std::string&, const TargetSet&)> on_targets;
};

struct RunState {
  VoxelField field;
  FieldOptimizer optimizer;
  long iterations = 0;
  std::vector<HistoryRow> history;
};

RunState make_run_state(int field_resolution, const DistillConfig& cfg);

/// Walks the first stage1_steps() ladder steps, refreshing targets and
/// optimizing N iterations against each set. Returns the last target set.
TargetSet stage1_run(RunState& state, const DistillContext& ctx, const DdimPlan& plan, const DistillConfig& cfg);

/// Final fixed targets: DDIM over the remaining ladder from noised renders
/// (or from pure noise when Stage 1 was skipped).
TargetSet stage2_targets(const VoxelField& field, const DistillContext& ctx, const DdimPlan& plan,
                         const DistillConfig& cfg);

/// Optimizes against fixed targets until the budget or the plateau rule.
void stage2_run(RunState& state, const DistillContext& ctx, const TargetSet& targets, const DistillConfig& cfg);

struct DistillResult {
  VoxelField field;
  std::vector<HistoryRow> history;
  long iterations = 0;
  std::optional<TargetSet> final_stage1_targets;
  std::optional<TargetSet> stage2_targets;
};

/// Runs the configured strategy from a fresh field.
DistillResult distill(const DistillContext& ctx, const DistillConfig& cfg, int field_resolution);
DistillResult distill_progressive(const DistillContext& ctx, const DistillConfig& cfg, int field_resolution);
DistillResult sds_baseline(const DistillContext& ctx, const DistillConfig& cfg, int field_resolution);

/// Mean density of `field` over nodes whose nearest ground-truth node lies
/// outside a two-voxel dilation of the support (gt sigma >= 1e-3).
double leakage_metric(const VoxelField& field, const VoxelField& gt_field);

struct Metrics {
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
  double perceptual = 0.0;
  double leakage = 0.0;
};

/// Held-out image metrics averaged per view, plus leakage.
Metrics evaluate(const VoxelField& field, std::span<const Camera> holdout, std::span<const Image> gt_renders,
                 const VoxelField& gt_field, const RenderConfig& render);

double heldout_mse(const VoxelField& field, std::span<const Camera> holdout, std::span<const Image> gt_renders,
                   const RenderConfig& render);

}  // namespace distillab
