// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/distill.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "distillab/parallel.hpp"
#include "distillab/rng.hpp"

namespace distillab {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kProgressive:
      return "progressive";
    case Strategy::kStage1Only:
      return "stage1_only";
    case Strategy::kStage2Only:
      return "stage2_only";
    case Strategy::kSds:
      return "sds";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "progressive") return Strategy::kProgressive;
  if (name == "stage1_only") return Strategy::kStage1Only;
  if (name == "stage2_only") return Strategy::kStage2Only;
  if (name == "sds") return Strategy::kSds;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Config

DistillConfig DistillConfig::desk() {
  DistillConfig c;
  c.ddim_steps = 20;
  c.iterations_per_refresh = 30;
  return c;
}

int DistillConfig::stage1_steps() const {
  switch (strategy) {
    case Strategy::kStage1Only:
      return ddim_steps;
    case Strategy::kStage2Only:
    case Strategy::kSds:
      return 0;
    case Strategy::kProgressive:
      break;
  }
  return static_cast<int>(std::lround(stage1_fraction * ddim_steps));
}

int DistillConfig::stage2_iterations() const {
  return stage2_budget < 0 ? 20 * iterations_per_refresh : stage2_budget;
}

bool DistillConfig::has_stage2() const {
  return strategy != Strategy::kSds && strategy != Strategy::kStage1Only && stage1_steps() < ddim_steps;
}

std::size_t DistillConfig::rung_for_step(int step) const {
  const std::size_t rungs = resolution_ladder.size();
  if (rungs <= 1) return 0;
  const double advance = ladder_advance_fraction * ddim_steps;
  if (advance <= 0.0) return rungs - 1;
  // Rung r begins at step round(advance * r / (rungs - 1)).
  std::size_t rung = 0;
  for (std::size_t r = 1; r < rungs; ++r)
    if (step >= std::lround(advance * static_cast<double>(r) / static_cast<double>(rungs - 1))) rung = r;
  return rung;
}

void DistillConfig::validate() const {
  if (ddim_steps < 1) throw std::invalid_argument("distill.K must be at least 1");
  if (!(stage1_fraction >= 0.0 && stage1_fraction <= 1.0))
    throw std::invalid_argument("distill.stage1_fraction must lie in [0, 1]");
  if (iterations_per_refresh < 1) throw std::invalid_argument("distill.N must be at least 1");
  if (!(cfg_scale >= 0.0)) throw std::invalid_argument("distill.cfg_scale must be non-negative");
  if (stage2_cfg_scale && !(*stage2_cfg_scale >= 0.0))
    throw std::invalid_argument("distill.stage2_cfg_scale must be non-negative");
  if (patch_count < 1 || patch_size < 1) throw std::invalid_argument("distill patch count and size must be positive");
  if (resolution_ladder.empty()) throw std::invalid_argument("distill.resolution_ladder must not be empty");
  for (int r : resolution_ladder)
    if (r < 16) throw std::invalid_argument("distill.resolution_ladder rungs must be at least 16 pixels");
  if (plateau_window < 1) throw std::invalid_argument("distill.plateau_window must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("distill.learning_rate must be positive");
  if (!(init_sigma > 0.0)) throw std::invalid_argument("distill.init_sigma must be positive");
  if (!(sds.t_min_frac > 0.0 && sds.t_min_frac <= sds.t_max_frac && sds.t_max_frac <= 1.0))
    throw std::invalid_argument("distill.sds requires 0 < t_min_frac <= t_max_frac <= 1");
  if (sds.iterations < 0 || sds.views_per_iteration < 1 || sds.checkpoint_every < 1)
    throw std::invalid_argument("distill.sds iteration settings must be positive");
}

std::uint64_t TargetSet::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t i = 0; i < targets.size(); ++i) {
    mix(static_cast<std::uint64_t>(targets[i].width()));
    mix(static_cast<std::uint64_t>(targets[i].height()));
    mix(static_cast<std::uint64_t>(i < timesteps.size() ? timesteps[i] : -1));
    for (double v : targets[i].values()) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Loss

ReconLoss loss_recon(std::span<const Image> renders, std::span<const Image> targets, double perceptual_weight) {
  if (renders.size() != targets.size()) throw ShapeMismatch("loss_recon: render and target counts differ");
  if (renders.empty()) throw std::invalid_argument("loss_recon: nothing to compare");
  const double pairs = static_cast<double>(renders.size());
  ReconLoss out;
  out.grads.resize(renders.size());
  std::vector<double> values(renders.size(), 0.0);
  for (std::size_t i = 0; i < renders.size(); ++i) require_same_shape(renders[i], targets[i], "loss_recon");
  parallel_for(renders.size(), [&](std::size_t i) {
    const Image& x = renders[i];
    const Image& y = targets[i];
    Image grad(x.width(), x.height());
    const auto xv = x.values();
    const auto yv = y.values();
    auto gv = grad.values();
    const double n = static_cast<double>(xv.size());
    double l1 = 0.0;
    for (std::size_t k = 0; k < xv.size(); ++k) {
      const double d = xv[k] - yv[k];
      l1 += std::abs(d);
      gv[k] = d > 0.0 ? 1.0 / (n * pairs) : (d < 0.0 ? -1.0 / (n * pairs) : 0.0);
    }
    double value = l1 / n;
    if (perceptual_weight != 0.0) {
      Image pgrad;
      value += perceptual_weight * perceptual_dist_grad(x, y, pgrad);
      const auto pv = pgrad.values();
      for (std::size_t k = 0; k < gv.size(); ++k) gv[k] += perceptual_weight * pv[k] / pairs;
    }
    values[i] = value;
    out.grads[i] = std::move(grad);
  });
  out.value = std::accumulate(values.begin(), values.end(), 0.0) / pairs;
  return out;
}

// ---------------------------------------------------------------------------
// Targets

std::vector<Image> view_noise(std::size_t views, int width, int height, std::uint64_t seed, std::uint64_t round) {
  std::vector<Image> out;
  out.reserve(views);
  for (std::size_t v = 0; v < views; ++v) {
    Rng rng(seed, RngComponent::kViewNoise, round * views + v);
    Image eps(width, height);
    for (double& x : eps.values()) x = rng.normal();
    out.push_back(std::move(eps));
  }
  return out;
}

namespace {

std::vector<Camera> at_resolution(std::span<const Camera> cameras, int side) {
  std::vector<Camera> out;
  out.reserve(cameras.size());
  for (const auto& c : cameras) out.push_back(c.with_resolution(side, side));
  return out;
}

std::vector<Image> render_all(const VoxelField& field, std::span<const Camera> cameras, const RenderConfig& render) {
  std::vector<Image> out(cameras.size());
  parallel_for(cameras.size(), [&](std::size_t v) { out[v] = render_view(field, cameras[v], render); });
  return out;
}

double mean_hf(const TargetSet& set) {
  double sum = 0.0;
  for (const auto& t : set.targets) sum += high_frequency_energy(t, 2.0);
  return set.targets.empty() ? 0.0 : sum / static_cast<double>(set.targets.size());
}

void record(RunState& state, const DistillContext& ctx, HistoryRow row, bool probe) {
  row.iteration = state.iterations;
  row.heldout_mse = probe && ctx.probe ? ctx.probe(state.field) : std::numeric_limits<double>::quiet_NaN();
  if (ctx.progress) ctx.progress(row);
  state.history.push_back(std::move(row));
}

void check_context(const DistillContext& ctx) {
  if (!ctx.prior) throw std::invalid_argument("distill: no prior supplied");
  if (ctx.cameras.empty()) throw std::invalid_argument("distill: no training cameras");
}

// One Adam iteration on random patches of the target set. Returns the loss.
double patch_iteration(RunState& state, std::span<const Camera> cameras, const TargetSet& targets,
                       const DistillConfig& cfg, const RenderConfig& render, Rng& rng) {
  const int side = targets.targets.front().width();
  const int size = std::min(cfg.patch_size, side);
  std::vector<ViewPatch> patches(static_cast<std::size_t>(cfg.patch_count));
  for (auto& p : patches) {
    p.camera = rng.index(cameras.size());
    p.patch.size = size;
    p.patch.row = static_cast<int>(rng.index(static_cast<std::size_t>(side - size + 1)));
    p.patch.col = static_cast<int>(rng.index(static_cast<std::size_t>(side - size + 1)));
  }
  const std::vector<Image> renders = render_batch(state.field, cameras, render, patches);
  std::vector<Image> crops;
  crops.reserve(patches.size());
  for (const auto& p : patches) crops.push_back(crop(targets.targets[p.camera], p.patch));
  const ReconLoss loss = loss_recon(renders, crops, cfg.perceptual_weight);
  const FieldGrad grad = backward(state.field, cameras, render, patches, loss.grads);
  state.optimizer.step(state.field, grad);
  ++state.iterations;
  return loss.value;
}

}  // namespace

TargetSet refresh_targets_single_step(const VoxelField& field, std::span<const Camera> cameras,
                                      const DenoiserPrior& prior, int t, const NoiseSchedule& sched,
                                      double cfg_scale, std::span<const Image> eps_set, const RenderConfig& render) {
  if (t < 1 || t > sched.train_steps()) throw std::domain_error("refresh_targets_single_step: t must lie in [1, T]");
  if (eps_set.size() != cameras.size()) throw std::invalid_argument("refresh_targets_single_step: one noise per view");
  TargetSet set;
  set.targets.resize(cameras.size());
  set.timesteps.assign(cameras.size(), t);
  parallel_for(cameras.size(), [&](std::size_t v) {
    const Image x = render_view(field, cameras[v], render);
    const Image z = q_sample(x, t, eps_set[v], sched);
    const Image eps_hat = guided_eps(prior, z, t, static_cast<int>(v), cfg_scale);
    set.targets[v] = eps_to_x0(z, eps_hat, t, sched);
  });
  return set;
}

RunState make_run_state(int field_resolution, const DistillConfig& cfg) {
  return RunState{VoxelField::optimizable(field_resolution, cfg.init_sigma), FieldOptimizer(cfg.learning_rate), 0, {}};
}

TargetSet stage1_run(RunState& state, const DistillContext& ctx, const DdimPlan& plan, const DistillConfig& cfg) {
  check_context(ctx);
  const int s1 = cfg.stage1_steps();
  if (s1 < 1) throw std::invalid_argument("stage1_run: needs at least one Stage-1 step");
  if (s1 > plan.step_count()) throw std::invalid_argument("stage1_run: more steps than the ladder holds");
  Rng rng(cfg.seed, RngComponent::kPatches, 1);
  const std::size_t views = ctx.cameras.size();

  std::map<int, std::vector<Image>> fixed_noise;
  std::vector<Image> latents;  // continue_latent only
  std::vector<Image> latent_eps;
  int latent_side = 0;
  TargetSet targets;

  for (int step = 0; step < s1; ++step) {
    const int t = plan.steps[static_cast<std::size_t>(step)];
    const int side = cfg.resolution_ladder[cfg.rung_for_step(step)];
    const auto cams = at_resolution(ctx.cameras, side);
    if (!fixed_noise.contains(side)) fixed_noise[side] = view_noise(views, side, side, cfg.seed);
    const std::vector<Image> eps =
        cfg.resample_noise ? view_noise(views, side, side, cfg.seed, static_cast<std::uint64_t>(step) + 1)
                           : fixed_noise[side];

    if (cfg.continue_latent && latent_side == side && !latents.empty()) {
      const int t_prev = plan.steps[static_cast<std::size_t>(step - 1)];
      targets.targets.assign(views, Image());
      targets.timesteps.assign(views, t);
      parallel_for(views, [&](std::size_t v) {
        latents[v] = ddim_step(latents[v], latent_eps[v], t_prev, t, ctx.sched);
        latent_eps[v] = guided_eps(*ctx.prior, latents[v], t, static_cast<int>(v), cfg.cfg_scale);
        targets.targets[v] = eps_to_x0(latents[v], latent_eps[v], t, ctx.sched);
      });
    } else {
      targets = refresh_targets_single_step(state.field, cams, *ctx.prior, t, ctx.sched, cfg.cfg_scale, eps,
                                            ctx.render);
      if (cfg.continue_latent) {
        latent_side = side;
        latents.assign(views, Image());
        latent_eps.assign(views, Image());
        parallel_for(views, [&](std::size_t v) {
          latents[v] = q_sample(render_view(state.field, cams[v], ctx.render), t, eps[v], ctx.sched);
          latent_eps[v] = x0_to_eps(latents[v], targets.targets[v], t, ctx.sched);
        });
      }
    }
    if (ctx.on_targets) ctx.on_targets("stage1_" + std::to_string(step), targets);

    double loss = 0.0;
    for (int it = 0; it < cfg.iterations_per_refresh; ++it)
      loss += patch_iteration(state, cams, targets, cfg, ctx.render, rng);
    record(state, ctx,
           {"stage1", step, t, side, 0, loss / cfg.iterations_per_refresh, mean_hf(targets), 0.0},
           true);
  }
  return targets;
}

TargetSet stage2_targets(const VoxelField& field, const DistillContext& ctx, const DdimPlan& plan,
                         const DistillConfig& cfg) {
  check_context(ctx);
  const int boundary = cfg.stage1_steps();
  const int k = plan.step_count();
  if (boundary < 0 || boundary > k) throw std::invalid_argument("stage2_targets: boundary outside the ladder");
  const int side = cfg.resolution_ladder.back();
  const auto cams = at_resolution(ctx.cameras, side);
  const auto eps = view_noise(cams.size(), side, side, cfg.seed);
  const double scale = cfg.stage2_cfg_scale.value_or(cfg.cfg_scale);

  if (boundary == k) {
    // No steps remain: the single-step estimate at the last nonzero rung.
    return refresh_targets_single_step(field, cams, *ctx.prior, plan.steps[static_cast<std::size_t>(k - 1)],
                                       ctx.sched, scale, eps, ctx.render);
  }
  const int t = plan.steps[static_cast<std::size_t>(boundary)];
  TargetSet set;
  set.targets.resize(cams.size());
  set.timesteps.assign(cams.size(), t);
  parallel_for(cams.size(), [&](std::size_t v) {
    const Image z = boundary == 0 ? eps[v] : q_sample(render_view(field, cams[v], ctx.render), t, eps[v], ctx.sched);
    set.targets[v] = ddim_run(z, t, plan, *ctx.prior, static_cast<int>(v), scale, ctx.sched);
  });
  return set;
}

void stage2_run(RunState& state, const DistillContext& ctx, const TargetSet& targets, const DistillConfig& cfg) {
  check_context(ctx);
  const int budget = cfg.stage2_iterations();
  if (budget <= 0) return;
  if (targets.size() != ctx.cameras.size()) throw std::invalid_argument("stage2_run: one target per camera");
  const int side = targets.targets.front().width();
  const auto cams = at_resolution(ctx.cameras, side);
  Rng rng(cfg.seed, RngComponent::kPatches, 2);

  constexpr int kSmooth = 20;
  const int window = cfg.plateau_window;
  const int block = std::max(1, cfg.iterations_per_refresh);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(budget));
  auto smoothed_at = [&](std::size_t end) {
    return std::accumulate(losses.begin() + static_cast<std::ptrdiff_t>(end - kSmooth),
                           losses.begin() + static_cast<std::ptrdiff_t>(end), 0.0) /
           kSmooth;
  };
  double block_loss = 0.0;
  int block_count = 0;
  int checkpoint = 0;
  for (int it = 0; it < budget; ++it) {
    const double loss = patch_iteration(state, cams, targets, cfg, ctx.render, rng);
    losses.push_back(loss);
    block_loss += loss;
    ++block_count;
    bool plateau = false;
    if (losses.size() >= static_cast<std::size_t>(window + kSmooth)) {
      const double now = smoothed_at(losses.size());
      const double before = smoothed_at(losses.size() - static_cast<std::size_t>(window));
      plateau = before > 0.0 && (before - now) / before < cfg.plateau_tolerance;
    }
    if (block_count == block || it + 1 == budget || plateau) {
      record(state, ctx,
             {"stage2", checkpoint++, targets.timesteps.empty() ? 0 : targets.timesteps.front(), side, 0,
              block_loss / block_count, mean_hf(targets), 0.0},
             true);
      block_loss = 0.0;
      block_count = 0;
    }
    if (plateau) break;
  }
}

DistillResult distill(const DistillContext& ctx, const DistillConfig& cfg, int field_resolution) {
  cfg.validate();
  if (cfg.strategy == Strategy::kSds) return sds_baseline(ctx, cfg, field_resolution);
  return distill_progressive(ctx, cfg, field_resolution);
}

DistillResult distill_progressive(const DistillContext& ctx, const DistillConfig& cfg, int field_resolution) {
  cfg.validate();
  check_context(ctx);
  const DdimPlan plan = make_plan(ctx.sched.train_steps(), cfg.ddim_steps);
  RunState state = make_run_state(field_resolution, cfg);
  DistillResult result;
  if (cfg.stage1_steps() > 0) result.final_stage1_targets = stage1_run(state, ctx, plan, cfg);
  if (cfg.has_stage2()) {
    TargetSet fixed = stage2_targets(state.field, ctx, plan, cfg);
    if (ctx.on_targets) ctx.on_targets("stage2", fixed);
    stage2_run(state, ctx, fixed, cfg);
    result.stage2_targets = std::move(fixed);
  }
  result.field = std::move(state.field);
  result.history = std::move(state.history);
  result.iterations = state.iterations;
  return result;
}

DistillResult sds_baseline(const DistillContext& ctx, const DistillConfig& cfg, int field_resolution) {
  cfg.validate();
  check_context(ctx);
  const auto& sds = cfg.sds;
  RunState state = make_run_state(field_resolution, cfg);
  const int side = cfg.resolution_ladder.back();
  const auto cams = at_resolution(ctx.cameras, side);
  const int T = ctx.sched.train_steps();
  Rng rng(cfg.seed, RngComponent::kSds, 0);
  const auto views = static_cast<std::size_t>(sds.views_per_iteration);

  double block_loss = 0.0;
  int block_count = 0;
  int checkpoint = 0;
  for (int it = 0; it < sds.iterations; ++it) {
    double t_max = sds.t_max_frac;
    if (sds.anneal_tmax && sds.iterations > 1)
      t_max += (sds.t_min_frac - sds.t_max_frac) * static_cast<double>(it) / (sds.iterations - 1);
    const int t = std::clamp(static_cast<int>(std::lround(rng.uniform(sds.t_min_frac, t_max) * T)), 1, T);

    std::vector<Camera> chosen;
    std::vector<int> chosen_index;
    std::vector<Image> eps;
    for (std::size_t k = 0; k < views; ++k) {
      const std::size_t v = rng.index(cams.size());
      chosen.push_back(cams[v]);
      chosen_index.push_back(static_cast<int>(v));
      Image e(side, side);
      for (double& x : e.values()) x = rng.normal();
      eps.push_back(std::move(e));
    }
    std::vector<Image> renders(views);
    std::vector<Image> targets(views);
    parallel_for(views, [&](std::size_t k) {
      renders[k] = render_view(state.field, chosen[k], ctx.render);
      const Image z = q_sample(renders[k], t, eps[k], ctx.sched);
      targets[k] = eps_to_x0(z, guided_eps(*ctx.prior, z, t, chosen_index[k], cfg.cfg_scale), t, ctx.sched);
    });
    const ReconLoss loss = loss_recon(renders, targets, cfg.perceptual_weight);
    std::vector<ViewPatch> patches;
    for (std::size_t k = 0; k < views; ++k) patches.push_back({k, PatchSpec{0, 0, side}});
    const FieldGrad grad = backward(state.field, chosen, ctx.render, patches, loss.grads);
    state.optimizer.step(state.field, grad);
    ++state.iterations;

    block_loss += loss.value;
    ++block_count;
    if (block_count == sds.checkpoint_every || it + 1 == sds.iterations) {
      record(state, ctx,
             {"sds", checkpoint++, t, side, 0, block_loss / block_count, std::numeric_limits<double>::quiet_NaN(), 0.0},
             true);
      block_loss = 0.0;
      block_count = 0;
    }
  }
  DistillResult result;
  result.field = std::move(state.field);
  result.history = std::move(state.history);
  result.iterations = state.iterations;
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

double leakage_metric(const VoxelField& field, const VoxelField& gt_field) {
  const int r = field.resolution();
  const int g = gt_field.resolution();
  if (r < 2 || g < 2) throw std::invalid_argument("leakage_metric: fields must have at least 2 nodes per axis");
  constexpr double kSupport = 1e-3;
  constexpr int kDilation = 2;

  std::vector<char> support(gt_field.node_count(), 0);
  for (std::size_t n = 0; n < gt_field.node_count(); ++n) support[n] = gt_field.sigma_at_node(n) >= kSupport;
  // Separable box dilation (Chebyshev radius 2), one axis at a time.
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<char> next(support.size(), 0);
    for (int k = 0; k < g; ++k)
      for (int j = 0; j < g; ++j)
        for (int i = 0; i < g; ++i) {
          char hit = 0;
          for (int d = -kDilation; d <= kDilation && !hit; ++d) {
            int ii = i, jj = j, kk = k;
            (axis == 0 ? ii : axis == 1 ? jj : kk) += d;
            if (ii < 0 || jj < 0 || kk < 0 || ii >= g || jj >= g || kk >= g) continue;
            hit = support[gt_field.node_index(ii, jj, kk)];
          }
          next[gt_field.node_index(i, j, k)] = hit;
        }
    support.swap(next);
  }

  auto nearest = [&](int i) {
    return std::clamp(static_cast<int>(std::lround(static_cast<double>(i) * (g - 1) / (r - 1))), 0, g - 1);
  };
  double sum = 0.0;
  std::size_t count = 0;
  for (int k = 0; k < r; ++k)
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i) {
        if (support[gt_field.node_index(nearest(i), nearest(j), nearest(k))]) continue;
        sum += field.sigma_at_node(field.node_index(i, j, k));
        ++count;
      }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

Metrics evaluate(const VoxelField& field, std::span<const Camera> holdout, std::span<const Image> gt_renders,
                 const VoxelField& gt_field, const RenderConfig& render) {
  if (holdout.size() != gt_renders.size() || holdout.empty())
    throw std::invalid_argument("evaluate: one ground-truth render per held-out camera");
  const auto renders = render_all(field, holdout, render);
  Metrics m;
  const double n = static_cast<double>(holdout.size());
  for (std::size_t v = 0; v < holdout.size(); ++v) {
    m.psnr += std::min(psnr(renders[v], gt_renders[v]), kPsnrCsvCap) / n;
    m.ssim += ssim(renders[v], gt_renders[v]) / n;
    m.mse += mse(renders[v], gt_renders[v]) / n;
    m.perceptual += perceptual_dist(renders[v], gt_renders[v]) / n;
  }
  m.leakage = leakage_metric(field, gt_field);
  return m;
}

double heldout_mse(const VoxelField& field, std::span<const Camera> holdout, std::span<const Image> gt_renders,
                   const RenderConfig& render) {
  const auto renders = render_all(field, holdout, render);
  double sum = 0.0;
  for (std::size_t v = 0; v < holdout.size(); ++v) sum += mse(renders[v], gt_renders[v]);
  return sum / static_cast<double>(holdout.size());
}

}  // namespace distillab
