// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "distillab/diffusion.hpp"
#include "distillab/image.hpp"

namespace distillab {

// ---------------------------------------------------------------------------
// Oracle prior

struct OracleConfig {
  /// RMS amplitude of the per-view inconsistency field.
  double amplitude = 0.05;
  /// Blur (pixels at the reference width) applied to the white noise that
  /// seeds each inconsistency field.
  double smoothness_px = 4.0;
  /// Largest input blur (pixels at the reference width), reached once the
  /// noise-to-signal ratio is 1.
  double r_max_px = 6.0;
  /// How far the conditional prediction moves from the unconditional one
  /// toward the view target. Guidance scale times this factor is the
  /// effective pull; 1/19 makes the default guidance land on the target.
  double conditioning = 1.0 / 19.0;
  /// Width at which the pixel quantities above are specified.
  int reference_width = 64;
  std::uint64_t seed = 0;
};

/// Analytic stand-in for a trained diffusion prior. Its clean-image estimate
/// blends a blurred copy of the (noisy) input with a per-view target; the
/// blend shifts toward the target as the noise level rises. Per-view targets
/// are ground truth plus a smooth view-specific perturbation, so independent
/// predictions for different views disagree.
class OracleDenoiser : public DenoiserPrior {
 public:
  /// gt_views are the ground-truth renders of the conditioning views at one
  /// resolution. Further resolutions are added with add_resolution.
  OracleDenoiser(OracleConfig cfg, NoiseSchedule sched, const std::vector<Image>& gt_views);

  void add_resolution(const std::vector<Image>& gt_views);

  Image predict_eps(const Image& z, int t, std::optional<int> view) const override;
  Image predict_x0(const Image& z, int t, std::optional<int> view) const;

  /// Weight given to the view target, rho / (rho + 1).
  double trust(int t) const;
  /// Input blur in pixels for an image of the given width.
  double input_blur(int t, int width) const;

  /// The clamped view target ground truth + inconsistency; null view gives
  /// the clamped mean image.
  const Image& view_target(std::optional<int> view, int width) const;
  const Image& inconsistency(int view, int width) const;
  std::size_t view_count() const { return view_count_; }
  const OracleConfig& config() const { return cfg_; }

 private:
  struct Level {
    std::vector<Image> targets;         // clamp(g_v + eta_v)
    std::vector<Image> conditional;     // unconditional + conditioning * (target - unconditional)
    std::vector<Image> inconsistency;   // eta_v
    Image unconditional;                // clamp(mean_v g_v)
  };
  const Level& level(int width, int height) const;
  const Level& level_for_width(int width) const;

  OracleConfig cfg_;
  NoiseSchedule sched_;
  std::size_t view_count_ = 0;
  std::vector<Image> reference_noise_;  // eta_v at the reference width
  std::map<std::pair<int, int>, Level> levels_;
};

// ---------------------------------------------------------------------------
// Trainable toy prior

struct ToyConfig {
  int views = 16;
  std::uint64_t seed = 0;
  int train_steps = 1000;
};

/// Three-level convolutional noise predictor (8 channels, 3x3 kernels) with a
/// sinusoidal timestep embedding and a learned per-view embedding; the last
/// embedding row is the unconditional one. Embeddings modulate every conv
/// layer by per-channel scale and shift.
class ToyDenoiser : public DenoiserPrior {
 public:
  static constexpr int kChannels = 8;
  static constexpr int kEmbedding = 8;

  explicit ToyDenoiser(ToyConfig cfg = {});

  Image predict_eps(const Image& z, int t, std::optional<int> view) const override;

  /// Mean squared error against eps; accumulates d(loss)/d(weights) into grad.
  double loss_and_grad(const Image& z, int t, std::optional<int> view, const Image& eps,
                       std::vector<double>& grad) const;

  std::span<float> weights() { return weights_; }
  std::span<const float> weights() const { return weights_; }
  const ToyConfig& config() const { return cfg_; }

 private:
  struct Forward;
  Forward run(const Image& z, int t, std::optional<int> view) const;
  int view_row(std::optional<int> view) const;

  ToyConfig cfg_;
  std::vector<float> weights_;
};

struct ToyTrainResult {
  std::vector<double> loss;
  /// Trailing 50-step moving average of loss.
  std::vector<double> smoothed;
};

/// Adam on E||eps - eps_hat||^2 with random timesteps and fresh noise; one in
/// ten samples drops its view to train the unconditional embedding.
ToyTrainResult toy_train(ToyDenoiser& denoiser, const std::vector<std::pair<int, Image>>& dataset,
                         const NoiseSchedule& sched, int steps, double lr = 1e-3, std::uint64_t seed = 0,
                         int batch = 4);

void save_toy(const ToyDenoiser& denoiser, const std::filesystem::path& path);
ToyDenoiser load_toy(const std::filesystem::path& path);

}  // namespace distillab
