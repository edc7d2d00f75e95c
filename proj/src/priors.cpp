// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/priors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "distillab/blob.hpp"
#include "distillab/field.hpp"
#include "distillab/rng.hpp"

namespace distillab {

// ---------------------------------------------------------------------------
// OracleDenoiser

namespace {

Image smooth_noise(int width, int height, double blur_px, double rms, Rng& rng) {
  Image noise(width, height);
  for (double& v : noise.values()) v = rng.normal();
  noise = gaussian_blur(noise, blur_px);
  double sq = 0.0;
  for (double v : noise.values()) sq += v * v;
  const double current = std::sqrt(sq / static_cast<double>(noise.size()));
  const double scale = current > 0.0 ? rms / current : 0.0;
  for (double& v : noise.values()) v *= scale;
  return noise;
}

}  // namespace

OracleDenoiser::OracleDenoiser(OracleConfig cfg, NoiseSchedule sched, const std::vector<Image>& gt_views)
    : cfg_(cfg), sched_(std::move(sched)), view_count_(gt_views.size()) {
  if (gt_views.empty()) throw std::invalid_argument("OracleDenoiser needs at least one ground-truth view");
  if (cfg_.amplitude < 0.0) throw std::invalid_argument("oracle amplitude must be non-negative");
  if (cfg_.r_max_px < 0.0) throw std::invalid_argument("oracle r_max must be non-negative");
  if (cfg_.reference_width < 1) throw std::invalid_argument("oracle reference width must be positive");
  const int ref_w = cfg_.reference_width;
  const int ref_h = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(ref_w) * gt_views.front().height() / gt_views.front().width())));
  reference_noise_.reserve(view_count_);
  for (std::size_t v = 0; v < view_count_; ++v) {
    Rng rng(cfg_.seed, RngComponent::kOracle, v);
    reference_noise_.push_back(smooth_noise(ref_w, ref_h, cfg_.smoothness_px, cfg_.amplitude, rng));
  }
  add_resolution(gt_views);
}

void OracleDenoiser::add_resolution(const std::vector<Image>& gt_views) {
  if (gt_views.size() != view_count_) throw std::invalid_argument("add_resolution: view count differs");
  const int w = gt_views.front().width();
  const int h = gt_views.front().height();
  Level level;
  Image mean(w, h);
  for (const auto& g : gt_views) {
    require_same_shape(g, mean, "OracleDenoiser views");
    auto m = mean.values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += gv[i];
  }
  for (double& v : mean.values()) v /= static_cast<double>(view_count_);
  level.unconditional = clamped(mean);
  for (std::size_t v = 0; v < view_count_; ++v) {
    Image eta = resample(reference_noise_[v], w, h);
    Image target = gt_views[v];
    auto tv = target.values();
    const auto ev = eta.values();
    for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = std::clamp(tv[i] + ev[i], 0.0, 1.0);
    Image cond = level.unconditional;
    auto cv = cond.values();
    for (std::size_t i = 0; i < cv.size(); ++i) cv[i] += cfg_.conditioning * (tv[i] - cv[i]);
    level.inconsistency.push_back(std::move(eta));
    level.targets.push_back(std::move(target));
    level.conditional.push_back(std::move(cond));
  }
  levels_[{w, h}] = std::move(level);
}

const OracleDenoiser::Level& OracleDenoiser::level(int width, int height) const {
  const auto it = levels_.find({width, height});
  if (it == levels_.end())
    throw std::invalid_argument("OracleDenoiser: no ground truth at " + std::to_string(width) + "x" +
                                std::to_string(height));
  return it->second;
}

const OracleDenoiser::Level& OracleDenoiser::level_for_width(int width) const {
  for (const auto& [size, lv] : levels_)
    if (size.first == width) return lv;
  throw std::invalid_argument("OracleDenoiser: no ground truth at width " + std::to_string(width));
}

double OracleDenoiser::trust(int t) const {
  const double rho = sched_.noise_to_signal(t);
  return rho / (rho + 1.0);
}

double OracleDenoiser::input_blur(int t, int width) const {
  const double rho = sched_.noise_to_signal(t);
  return cfg_.r_max_px * std::min(1.0, rho) * width / cfg_.reference_width;
}

const Image& OracleDenoiser::view_target(std::optional<int> view, int width) const {
  const auto& lv = level_for_width(width);
  if (!view) return lv.unconditional;
  return lv.targets.at(static_cast<std::size_t>(*view));
}

const Image& OracleDenoiser::inconsistency(int view, int width) const {
  return level_for_width(width).inconsistency.at(static_cast<std::size_t>(view));
}

Image OracleDenoiser::predict_x0(const Image& z, int t, std::optional<int> view) const {
  if (t < 1 || t > sched_.train_steps()) throw std::domain_error("OracleDenoiser: timestep must lie in [1, T]");
  const Level& lv = level(z.width(), z.height());
  if (view && (*view < 0 || static_cast<std::size_t>(*view) >= view_count_))
    throw std::out_of_range("OracleDenoiser: view index out of range");
  const Image& target = view ? lv.conditional[static_cast<std::size_t>(*view)] : lv.unconditional;

  Image input = z;
  const double inv_sqrt_ab = 1.0 / std::sqrt(sched_.alpha_bar(t));
  for (double& v : input.values()) v *= inv_sqrt_ab;
  input = gaussian_blur(input, input_blur(t, z.width()));

  const double w = trust(t);
  auto iv = input.values();
  const auto tv = target.values();
  for (std::size_t i = 0; i < iv.size(); ++i) iv[i] = w * tv[i] + (1.0 - w) * iv[i];
  return input;
}

Image OracleDenoiser::predict_eps(const Image& z, int t, std::optional<int> view) const {
  return x0_to_eps(z, predict_x0(z, t, view), t, sched_);
}

// ---------------------------------------------------------------------------
// ToyDenoiser

namespace {

constexpr int kC = ToyDenoiser::kChannels;
constexpr int kE = ToyDenoiser::kEmbedding;
constexpr int kOut = Image::kChannels;
constexpr int kLayers = 5;
// Input and output channel counts per conv layer.
constexpr std::array<int, kLayers> kIn{kOut, kC, kC, kC, kC};
constexpr std::array<int, kLayers> kOutCh{kC, kC, kC, kC, kOut};

struct Layout {
  std::array<std::size_t, kLayers> conv_w{};
  std::array<std::size_t, kLayers> conv_b{};
  std::array<std::size_t, kLayers> film_g{};
  std::array<std::size_t, kLayers> film_b{};
  std::size_t temb_w = 0;
  std::size_t temb_b = 0;
  std::size_t view_emb = 0;
  std::size_t total = 0;
};

Layout make_layout(int views) {
  Layout l;
  std::size_t off = 0;
  for (int i = 0; i < kLayers; ++i) {
    const auto u = static_cast<std::size_t>(i);
    l.conv_w[u] = off;
    off += static_cast<std::size_t>(kOutCh[u] * kIn[u] * 9);
    l.conv_b[u] = off;
    off += static_cast<std::size_t>(kOutCh[u]);
    l.film_g[u] = off;
    off += static_cast<std::size_t>(kOutCh[u] * kE);
    l.film_b[u] = off;
    off += static_cast<std::size_t>(kOutCh[u] * kE);
  }
  l.temb_w = off;
  off += kE * kE;
  l.temb_b = off;
  off += kE;
  l.view_emb = off;
  off += static_cast<std::size_t>(views + 1) * kE;
  l.total = off;
  return l;
}

struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  double& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
};

Tensor from_image(const Image& img) {
  Tensor t(kOut, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < kOut; ++c) t.at(c, y, x) = img.at(x, y, c);
  return t;
}

Image to_image(const Tensor& t) {
  Image img(t.w, t.h);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x)
      for (int c = 0; c < kOut; ++c) img.at(x, y, c) = t.at(c, y, x);
  return img;
}

Tensor conv3x3(const Tensor& in, const float* weight, const float* bias, int out_ch) {
  Tensor out(out_ch, in.h, in.w);
  for (int o = 0; o < out_ch; ++o)
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        double acc = bias[o];
        for (int i = 0; i < in.c; ++i) {
          const float* k = weight + (static_cast<std::size_t>(o) * in.c + i) * 9;
          for (int ky = -1; ky <= 1; ++ky) {
            const int sy = y + ky;
            if (sy < 0 || sy >= in.h) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const int sx = x + kx;
              if (sx < 0 || sx >= in.w) continue;
              acc += k[(ky + 1) * 3 + (kx + 1)] * in.at(i, sy, sx);
            }
          }
        }
        out.at(o, y, x) = acc;
      }
  return out;
}

// Accumulates input, weight and bias gradients of conv3x3.
void conv3x3_backward(const Tensor& in, const float* weight, const Tensor& d_out, Tensor* d_in, double* d_weight,
                      double* d_bias) {
  for (int o = 0; o < d_out.c; ++o)
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) {
        const double g = d_out.at(o, y, x);
        if (g == 0.0) continue;
        d_bias[o] += g;
        for (int i = 0; i < in.c; ++i) {
          const std::size_t kbase = (static_cast<std::size_t>(o) * in.c + i) * 9;
          for (int ky = -1; ky <= 1; ++ky) {
            const int sy = y + ky;
            if (sy < 0 || sy >= in.h) continue;
            for (int kx = -1; kx <= 1; ++kx) {
              const int sx = x + kx;
              if (sx < 0 || sx >= in.w) continue;
              const std::size_t k = kbase + static_cast<std::size_t>((ky + 1) * 3 + (kx + 1));
              d_weight[k] += g * in.at(i, sy, sx);
              if (d_in) d_in->at(i, sy, sx) += g * weight[k];
            }
          }
        }
      }
}

Tensor avgpool2(const Tensor& in) {
  Tensor out(in.c, in.h / 2, in.w / 2);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x)
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) + in.at(c, 2 * y + 1, 2 * x) +
                                  in.at(c, 2 * y + 1, 2 * x + 1));
  return out;
}

void avgpool2_backward(const Tensor& d_out, Tensor& d_in) {
  for (int c = 0; c < d_out.c; ++c)
    for (int y = 0; y < d_out.h; ++y)
      for (int x = 0; x < d_out.w; ++x) {
        const double g = 0.25 * d_out.at(c, y, x);
        d_in.at(c, 2 * y, 2 * x) += g;
        d_in.at(c, 2 * y, 2 * x + 1) += g;
        d_in.at(c, 2 * y + 1, 2 * x) += g;
        d_in.at(c, 2 * y + 1, 2 * x + 1) += g;
      }
}

// Nearest-neighbour upsample of `coarse` added to `skip`.
Tensor upsample_add(const Tensor& coarse, const Tensor& skip) {
  Tensor out = skip;
  for (int c = 0; c < out.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) out.at(c, y, x) += coarse.at(c, y / 2, x / 2);
  return out;
}

void upsample_backward(const Tensor& d_out, Tensor& d_coarse) {
  for (int c = 0; c < d_out.c; ++c)
    for (int y = 0; y < d_out.h; ++y)
      for (int x = 0; x < d_out.w; ++x) d_coarse.at(c, y / 2, x / 2) += d_out.at(c, y, x);
}

std::array<double, kE> time_features(int t, int train_steps) {
  const double tau = static_cast<double>(t) / train_steps;
  std::array<double, kE> s{};
  constexpr std::array<double, kE / 2> freq{1.0, 4.0, 16.0, 64.0};
  for (std::size_t i = 0; i < freq.size(); ++i) {
    s[2 * i] = std::sin(freq[i] * tau);
    s[2 * i + 1] = std::cos(freq[i] * tau);
  }
  return s;
}

}  // namespace

struct ToyDenoiser::Forward {
  std::array<double, kE> time{};
  std::array<double, kE> embedding{};
  std::array<std::array<double, kC>, kLayers> gamma{};
  std::array<std::array<double, kC>, kLayers> beta{};
  // Conv inputs and raw conv outputs per layer.
  std::array<Tensor, kLayers> input;
  std::array<Tensor, kLayers> conv;
  // Post-activation hidden states h0..h3 and the output.
  std::array<Tensor, 4> hidden;
  Tensor output;
};

ToyDenoiser::ToyDenoiser(ToyConfig cfg) : cfg_(cfg) {
  if (cfg_.views < 1) throw std::invalid_argument("ToyDenoiser needs at least one view");
  const Layout l = make_layout(cfg_.views);
  weights_.assign(l.total, 0.0f);
  Rng rng(cfg_.seed, RngComponent::kToyPrior, 0);
  for (int i = 0; i < kLayers; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double fan_in = kIn[u] * 9.0;
    const double scale = (i == kLayers - 1 ? 0.1 : 1.0) * std::sqrt(2.0 / fan_in);
    for (std::size_t k = 0; k < static_cast<std::size_t>(kOutCh[u] * kIn[u] * 9); ++k)
      weights_[l.conv_w[u] + k] = static_cast<float>(scale * rng.normal());
    for (std::size_t k = 0; k < static_cast<std::size_t>(kOutCh[u] * kE); ++k) {
      weights_[l.film_g[u] + k] = static_cast<float>(0.05 * rng.normal());
      weights_[l.film_b[u] + k] = static_cast<float>(0.05 * rng.normal());
    }
  }
  for (std::size_t k = 0; k < kE * kE; ++k) weights_[l.temb_w + k] = static_cast<float>(rng.normal() / std::sqrt(kE));
  for (std::size_t k = 0; k < static_cast<std::size_t>(cfg_.views + 1) * kE; ++k)
    weights_[l.view_emb + k] = static_cast<float>(0.1 * rng.normal());
}

int ToyDenoiser::view_row(std::optional<int> view) const {
  if (!view) return cfg_.views;
  if (*view < 0 || *view >= cfg_.views) throw std::out_of_range("ToyDenoiser: view index out of range");
  return *view;
}

ToyDenoiser::Forward ToyDenoiser::run(const Image& z, int t, std::optional<int> view) const {
  if (t < 1 || t > cfg_.train_steps) throw std::domain_error("ToyDenoiser: timestep must lie in [1, T]");
  if (z.width() % 4 != 0 || z.height() % 4 != 0)
    throw std::invalid_argument("ToyDenoiser: image sides must be multiples of 4");
  const Layout l = make_layout(cfg_.views);
  const float* w = weights_.data();
  Forward f;
  f.time = time_features(t, cfg_.train_steps);
  const auto row = static_cast<std::size_t>(view_row(view));
  for (std::size_t i = 0; i < kE; ++i) {
    double acc = w[l.temb_b + i] + w[l.view_emb + row * kE + i];
    for (std::size_t j = 0; j < kE; ++j) acc += w[l.temb_w + i * kE + j] * f.time[j];
    f.embedding[i] = acc;
  }
  for (int layer = 0; layer < kLayers; ++layer) {
    const auto u = static_cast<std::size_t>(layer);
    for (std::size_t o = 0; o < static_cast<std::size_t>(kOutCh[u]); ++o) {
      double g = 0.0;
      double b = 0.0;
      for (std::size_t j = 0; j < kE; ++j) {
        g += w[l.film_g[u] + o * kE + j] * f.embedding[j];
        b += w[l.film_b[u] + o * kE + j] * f.embedding[j];
      }
      f.gamma[u][o] = g;
      f.beta[u][o] = b;
    }
  }

  auto layer_forward = [&](int layer, const Tensor& in, bool relu) {
    const auto u = static_cast<std::size_t>(layer);
    f.input[u] = in;
    f.conv[u] = conv3x3(in, w + l.conv_w[u], w + l.conv_b[u], kOutCh[u]);
    Tensor out = f.conv[u];
    for (int c = 0; c < out.c; ++c) {
      const double scale = 1.0 + f.gamma[u][static_cast<std::size_t>(c)];
      const double shift = f.beta[u][static_cast<std::size_t>(c)];
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
          const double v = out.at(c, y, x) * scale + shift;
          out.at(c, y, x) = relu ? std::max(0.0, v) : v;
        }
    }
    return out;
  };

  f.hidden[0] = layer_forward(0, from_image(z), true);
  f.hidden[1] = layer_forward(1, avgpool2(f.hidden[0]), true);
  f.hidden[2] = layer_forward(2, avgpool2(f.hidden[1]), true);
  f.hidden[3] = layer_forward(3, upsample_add(f.hidden[2], f.hidden[1]), true);
  f.output = layer_forward(4, upsample_add(f.hidden[3], f.hidden[0]), false);
  return f;
}

Image ToyDenoiser::predict_eps(const Image& z, int t, std::optional<int> view) const {
  return to_image(run(z, t, view).output);
}

double ToyDenoiser::loss_and_grad(const Image& z, int t, std::optional<int> view, const Image& eps,
                                  std::vector<double>& grad) const {
  require_same_shape(z, eps, "ToyDenoiser::loss_and_grad");
  const Layout l = make_layout(cfg_.views);
  if (grad.size() != l.total) grad.assign(l.total, 0.0);
  const Forward f = run(z, t, view);
  const Tensor target = from_image(eps);
  const double n = static_cast<double>(target.v.size());

  double loss = 0.0;
  Tensor d_out(f.output.c, f.output.h, f.output.w);
  for (std::size_t i = 0; i < target.v.size(); ++i) {
    const double d = f.output.v[i] - target.v[i];
    loss += d * d;
    d_out.v[i] = 2.0 * d / n;
  }
  loss /= n;

  const float* w = weights_.data();
  std::array<double, kE> d_embedding{};

  // Backward through FiLM (+ optional ReLU) and the conv of one layer.
  // `d_post` is the gradient w.r.t. the layer output; returns d(input).
  auto layer_backward = [&](int layer, Tensor d_post, const Tensor* post, bool relu) {
    const auto u = static_cast<std::size_t>(layer);
    const Tensor& conv = f.conv[u];
    Tensor d_conv(conv.c, conv.h, conv.w);
    for (int c = 0; c < conv.c; ++c) {
      const auto uc = static_cast<std::size_t>(c);
      const double scale = 1.0 + f.gamma[u][uc];
      double d_gamma = 0.0;
      double d_beta = 0.0;
      for (int y = 0; y < conv.h; ++y)
        for (int x = 0; x < conv.w; ++x) {
          double g = d_post.at(c, y, x);
          if (relu && post->at(c, y, x) <= 0.0) g = 0.0;
          d_gamma += g * conv.at(c, y, x);
          d_beta += g;
          d_conv.at(c, y, x) = g * scale;
        }
      for (std::size_t j = 0; j < kE; ++j) {
        grad[l.film_g[u] + uc * kE + j] += d_gamma * f.embedding[j];
        grad[l.film_b[u] + uc * kE + j] += d_beta * f.embedding[j];
        d_embedding[j] += d_gamma * w[l.film_g[u] + uc * kE + j] + d_beta * w[l.film_b[u] + uc * kE + j];
      }
    }
    const Tensor& in = f.input[u];
    Tensor d_in(in.c, in.h, in.w);
    conv3x3_backward(in, w + l.conv_w[u], d_conv, layer == 0 ? nullptr : &d_in, grad.data() + l.conv_w[u],
                     grad.data() + l.conv_b[u]);
    return d_in;
  };

  // out = L4(up(h3) + h0)
  const Tensor d_u0 = layer_backward(4, d_out, nullptr, false);
  Tensor d_h0 = d_u0;
  Tensor d_h3(f.hidden[3].c, f.hidden[3].h, f.hidden[3].w);
  upsample_backward(d_u0, d_h3);
  // h3 = L3(up(h2) + h1)
  const Tensor d_u1 = layer_backward(3, d_h3, &f.hidden[3], true);
  Tensor d_h1 = d_u1;
  Tensor d_h2(f.hidden[2].c, f.hidden[2].h, f.hidden[2].w);
  upsample_backward(d_u1, d_h2);
  // h2 = L2(pool(h1))
  const Tensor d_p2 = layer_backward(2, d_h2, &f.hidden[2], true);
  avgpool2_backward(d_p2, d_h1);
  // h1 = L1(pool(h0))
  const Tensor d_p1 = layer_backward(1, d_h1, &f.hidden[1], true);
  avgpool2_backward(d_p1, d_h0);
  // h0 = L0(z)
  layer_backward(0, d_h0, &f.hidden[0], true);

  const auto row = static_cast<std::size_t>(view_row(view));
  for (std::size_t i = 0; i < kE; ++i) {
    grad[l.temb_b + i] += d_embedding[i];
    grad[l.view_emb + row * kE + i] += d_embedding[i];
    for (std::size_t j = 0; j < kE; ++j) grad[l.temb_w + i * kE + j] += d_embedding[i] * f.time[j];
  }
  return loss;
}

ToyTrainResult toy_train(ToyDenoiser& denoiser, const std::vector<std::pair<int, Image>>& dataset,
                         const NoiseSchedule& sched, int steps, double lr, std::uint64_t seed, int batch) {
  if (dataset.empty()) throw std::invalid_argument("toy_train: dataset is empty");
  if (batch < 1) throw std::invalid_argument("toy_train: batch must be at least 1");
  Rng rng(seed, RngComponent::kToyPrior, 1);
  AdamState adam;
  adam.lr = lr;
  adam.beta2 = 0.999;
  ToyTrainResult result;
  std::vector<double> grad;
  for (int step = 0; step < steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      const auto& [view, image] = dataset[rng.index(dataset.size())];
      const int t = rng.integer(1, sched.train_steps());
      Image eps(image.width(), image.height());
      for (double& v : eps.values()) v = rng.normal();
      const bool drop = rng.uniform() < 0.1;
      const Image z = q_sample(image, t, eps, sched);
      loss += denoiser.loss_and_grad(z, t, drop ? std::nullopt : std::optional<int>(view), eps, grad);
    }
    for (double& g : grad) g /= batch;
    adam_step(denoiser.weights(), grad, adam);
    result.loss.push_back(loss / batch);
    const std::size_t window = std::min<std::size_t>(50, result.loss.size());
    const double sum = std::accumulate(result.loss.end() - static_cast<std::ptrdiff_t>(window), result.loss.end(), 0.0);
    result.smoothed.push_back(sum / static_cast<double>(window));
  }
  return result;
}

namespace {
const auto kToyMagic = make_magic("DLABTOY1");
}

void save_toy(const ToyDenoiser& denoiser, const std::filesystem::path& path) {
  Blob blob;
  blob.magic = kToyMagic;
  const auto& cfg = denoiser.config();
  blob.header = {static_cast<std::uint32_t>(cfg.views), static_cast<std::uint32_t>(ToyDenoiser::kChannels),
                 static_cast<std::uint32_t>(cfg.train_steps)};
  blob.payload.assign(denoiser.weights().begin(), denoiser.weights().end());
  write_blob(blob, path);
}

ToyDenoiser load_toy(const std::filesystem::path& path) {
  const Blob blob = read_blob(path, kToyMagic, 3);
  if (blob.header[1] != static_cast<std::uint32_t>(ToyDenoiser::kChannels))
    throw std::runtime_error(path.string() + ": unsupported channel count");
  ToyConfig cfg;
  cfg.views = static_cast<int>(blob.header[0]);
  cfg.train_steps = static_cast<int>(blob.header[2]);
  ToyDenoiser toy(cfg);
  if (blob.payload.size() != toy.weights().size())
    throw std::runtime_error(path.string() + ": weight count does not match the architecture");
  std::copy(blob.payload.begin(), blob.payload.end(), toy.weights().begin());
  return toy;
}

}  // namespace distillab
