// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "distillab/image.hpp"

namespace distillab {

/// Linear-beta forward process. Index t runs 0..train_steps; alpha_bar[0] = 1.
class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(1000, 1e-4, 2e-2) {}
  NoiseSchedule(int train_steps, double beta_min, double beta_max);

  int train_steps() const { return train_steps_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  /// Noise-to-signal ratio sqrt(1 - alpha_bar) / sqrt(alpha_bar).
  double noise_to_signal(int t) const;
  /// Timestep for a continuous noise level in [0, 1].
  int timestep_for_fraction(double fraction) const;

 private:
  int train_steps_;
  double beta_min_;
  double beta_max_;
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

NoiseSchedule make_schedule(int train_steps = 1000, double beta_min = 1e-4, double beta_max = 2e-2);

/// Deterministic DDIM timestep ladder t_K > ... > t_1 > t_0 = 0.
struct DdimPlan {
  std::vector<int> steps;

  int step_count() const { return static_cast<int>(steps.size()) - 1; }
  /// Position of t in the ladder, or nullopt.
  std::optional<std::size_t> position(int t) const;
};

DdimPlan make_plan(int train_steps, int k);

Image q_sample(const Image& x0, int t, const Image& eps, const NoiseSchedule& sched);
Image eps_to_x0(const Image& z, const Image& eps, int t, const NoiseSchedule& sched);
Image x0_to_eps(const Image& z, const Image& x0, int t, const NoiseSchedule& sched);
Image cfg_combine(const Image& eps_uncond, const Image& eps_cond, double scale);
/// Deterministic (eta = 0) DDIM update from t to t_next < t.
Image ddim_step(const Image& z, const Image& eps, int t, int t_next, const NoiseSchedule& sched);

/// Anything that predicts the noise in a noisy image. A null view requests
/// the unconditional prediction.
class DenoiserPrior {
 public:
  virtual ~DenoiserPrior() = default;
  virtual Image predict_eps(const Image& z, int t, std::optional<int> view) const = 0;
};

/// Classifier-free guided prediction; skips the unconditional query at scale 1.
Image guided_eps(const DenoiserPrior& prior, const Image& z, int t, std::optional<int> view, double scale);

/// Runs DDIM from t_start (which must be on the ladder) down to 0 and returns
/// the final clean estimate.
Image ddim_run(const Image& z_start, int t_start, const DdimPlan& plan, const DenoiserPrior& prior,
               std::optional<int> view, double cfg_scale, const NoiseSchedule& sched);

}  // namespace distillab
