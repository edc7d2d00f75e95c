// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace distillab {

NoiseSchedule::NoiseSchedule(int train_steps, double beta_min, double beta_max)
    : train_steps_(train_steps), beta_min_(beta_min), beta_max_(beta_max) {
  if (train_steps < 1) throw std::invalid_argument("noise schedule needs at least one training step");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw std::invalid_argument("noise schedule requires 0 < beta_min <= beta_max < 1");
  beta_.assign(static_cast<std::size_t>(train_steps) + 1, 0.0);
  alpha_bar_.assign(static_cast<std::size_t>(train_steps) + 1, 1.0);
  for (int t = 1; t <= train_steps; ++t) {
    const double frac = train_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (train_steps - 1);
    beta_[static_cast<std::size_t>(t)] = beta_min + frac * (beta_max - beta_min);
    alpha_bar_[static_cast<std::size_t>(t)] = alpha_bar_[static_cast<std::size_t>(t - 1)] * (1.0 - beta_[static_cast<std::size_t>(t)]);
  }
}

double NoiseSchedule::noise_to_signal(int t) const {
  const double ab = alpha_bar(t);
  return std::sqrt((1.0 - ab) / ab);
}

int NoiseSchedule::timestep_for_fraction(double fraction) const {
  return std::clamp(static_cast<int>(std::lround(fraction * train_steps_)), 0, train_steps_);
}

NoiseSchedule make_schedule(int train_steps, double beta_min, double beta_max) {
  return NoiseSchedule(train_steps, beta_min, beta_max);
}

std::optional<std::size_t> DdimPlan::position(int t) const {
  const auto it = std::find(steps.begin(), steps.end(), t);
  if (it == steps.end()) return std::nullopt;
  return static_cast<std::size_t>(it - steps.begin());
}

DdimPlan make_plan(int train_steps, int k) {
  if (k < 1 || k > train_steps) throw std::invalid_argument("DDIM step count must lie in [1, train_steps]");
  DdimPlan plan;
  plan.steps.reserve(static_cast<std::size_t>(k) + 1);
  for (int i = k; i >= 0; --i)
    plan.steps.push_back(static_cast<int>(std::lround(static_cast<double>(i) * train_steps / k)));
  return plan;
}

namespace {

void check_timestep(int t, const NoiseSchedule& sched, const char* what) {
  if (t < 0 || t > sched.train_steps())
    throw std::out_of_range(std::string(what) + ": timestep " + std::to_string(t) + " outside schedule");
}

// out = a * x + b * y, elementwise.
Image affine(const Image& x, double a, const Image& y, double b) {
  Image out(x.width(), x.height());
  const auto vx = x.values();
  const auto vy = y.values();
  auto vo = out.values();
  for (std::size_t i = 0; i < vo.size(); ++i) vo[i] = a * vx[i] + b * vy[i];
  return out;
}

}  // namespace

Image q_sample(const Image& x0, int t, const Image& eps, const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "q_sample");
  check_timestep(t, sched, "q_sample");
  const double ab = sched.alpha_bar(t);
  return affine(x0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));
}

Image eps_to_x0(const Image& z, const Image& eps, int t, const NoiseSchedule& sched) {
  require_same_shape(z, eps, "eps_to_x0");
  check_timestep(t, sched, "eps_to_x0");
  if (t == 0) throw std::domain_error("eps_to_x0: noise is undefined at t = 0");
  const double ab = sched.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(ab);
  return affine(z, inv, eps, -std::sqrt(1.0 - ab) * inv);
}

Image x0_to_eps(const Image& z, const Image& x0, int t, const NoiseSchedule& sched) {
  require_same_shape(z, x0, "x0_to_eps");
  check_timestep(t, sched, "x0_to_eps");
  if (t == 0) throw std::domain_error("x0_to_eps: noise is undefined at t = 0");
  const double ab = sched.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(1.0 - ab);
  return affine(z, inv, x0, -std::sqrt(ab) * inv);
}

Image cfg_combine(const Image& eps_uncond, const Image& eps_cond, double scale) {
  require_same_shape(eps_uncond, eps_cond, "cfg_combine");
  if (scale == 1.0) return eps_cond;
  if (scale == 0.0) return eps_uncond;
  Image out = eps_uncond;
  auto vo = out.values();
  const auto vc = eps_cond.values();
  for (std::size_t i = 0; i < vo.size(); ++i) vo[i] += scale * (vc[i] - vo[i]);
  return out;
}

Image ddim_step(const Image& z, const Image& eps, int t, int t_next, const NoiseSchedule& sched) {
  if (!(t > t_next && t_next >= 0)) throw std::invalid_argument("ddim_step: timesteps must strictly descend to >= 0");
  const Image x0 = eps_to_x0(z, eps, t, sched);
  if (t_next == 0) return x0;
  const double ab = sched.alpha_bar(t_next);
  return affine(x0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));
}

Image guided_eps(const DenoiserPrior& prior, const Image& z, int t, std::optional<int> view, double scale) {
  if (scale == 1.0 || !view) return prior.predict_eps(z, t, view);
  if (scale == 0.0) return prior.predict_eps(z, t, std::nullopt);
  return cfg_combine(prior.predict_eps(z, t, std::nullopt), prior.predict_eps(z, t, view), scale);
}

Image ddim_run(const Image& z_start, int t_start, const DdimPlan& plan, const DenoiserPrior& prior,
               std::optional<int> view, double cfg_scale, const NoiseSchedule& sched) {
  const auto pos = plan.position(t_start);
  if (!pos) throw std::invalid_argument("ddim_run: t_start " + std::to_string(t_start) + " is not on the ladder");
  Image z = z_start;
  for (std::size_t i = *pos; i + 1 < plan.steps.size(); ++i) {
    const int t = plan.steps[i];
    const int t_next = plan.steps[i + 1];
    z = ddim_step(z, guided_eps(prior, z, t, view, cfg_scale), t, t_next, sched);
  }
  return z;
}

}  // namespace distillab
