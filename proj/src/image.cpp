// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "distillab/rng.hpp"

namespace distillab {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels, fill);
}

double Image::at_clamped(int x, int y, int c) const {
  return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1), c);
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(what) + ": image shapes differ (" + std::to_string(a.width()) + "x" +
                        std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()) + ")");
  }
}

Image crop(const Image& img, const PatchSpec& patch) {
  if (!patch.fits(img.width(), img.height())) throw std::out_of_range("crop: patch outside image");
  Image out(patch.size, patch.size);
  for (int y = 0; y < patch.size; ++y)
    for (int x = 0; x < patch.size; ++x)
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = img.at(patch.col + x, patch.row + y, c);
  return out;
}

Image clamped(const Image& img) {
  Image out = img;
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_blur: sigma must be non-negative");
  if (sigma == 0.0 || img.empty()) return img;
  const auto taps = gaussian_kernel(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = img.width();
  const int h = img.height();

  Image horizontal(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += taps[static_cast<std::size_t>(k + radius)] * img.at_clamped(x + k, y, c);
        horizontal.at(x, y, c) = acc;
      }
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += taps[static_cast<std::size_t>(k + radius)] * horizontal.at_clamped(x, y + k, c);
        out.at(x, y, c) = acc;
      }
  return out;
}

Bands split_bands(const Image& img, double sigma) {
  Bands bands{gaussian_blur(img, sigma), img};
  auto high = bands.high.values();
  auto low = bands.low.values();
  for (std::size_t i = 0; i < high.size(); ++i) high[i] -= low[i];
  return bands;
}

double high_frequency_energy(const Image& img, double sigma) {
  const auto bands = split_bands(img, sigma);
  double acc = 0.0;
  for (double v : bands.high.values()) acc += v * v;
  return acc / static_cast<double>(img.size());
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  const auto va = a.values();
  const auto vb = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = std::clamp(va[i], 0.0, 1.0) - std::clamp(vb[i], 0.0, 1.0);
    acc += d * d;
  }
  return acc / static_cast<double>(va.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / m);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, kSsimWindow> ssim_taps() {
  std::array<double, kSsimWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    taps[static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Valid-mode separable filter of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h,
                                 const std::array<double, kSsimWindow>& taps) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(y * w + x + k)];
      rows[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>((y + k) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  const int w = a.width();
  const int h = a.height();
  if (std::min(w, h) < kSsimWindow) throw std::invalid_argument("ssim: image side must be at least 11 pixels");
  const auto taps = ssim_taps();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

  double total = 0.0;
  for (int c = 0; c < Image::kChannels; ++c) {
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto i = static_cast<std::size_t>(y * w + x);
        pa[i] = std::clamp(a.at(x, y, c), 0.0, 1.0);
        pb[i] = std::clamp(b.at(x, y, c), 0.0, 1.0);
        paa[i] = pa[i] * pa[i];
        pbb[i] = pb[i] * pb[i];
        pab[i] = pa[i] * pb[i];
      }
    const auto mu_a = filter_valid(pa, w, h, taps);
    const auto mu_b = filter_valid(pb, w, h, taps);
    const auto e_aa = filter_valid(paa, w, h, taps);
    const auto e_bb = filter_valid(pbb, w, h, taps);
    const auto e_ab = filter_valid(pab, w, h, taps);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + kSsimC1) * (2.0 * cov + kSsimC2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (var_a + var_b + kSsimC2);
      acc += num / den;
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / Image::kChannels;
}

double saturation_metric(const Image& img) {
  double acc = 0.0;
  const int w = img.width();
  const int h = img.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double r = std::clamp(img.at(x, y, 0), 0.0, 1.0);
      const double g = std::clamp(img.at(x, y, 1), 0.0, 1.0);
      const double b = std::clamp(img.at(x, y, 2), 0.0, 1.0);
      acc += std::max({r, g, b}) - std::min({r, g, b});
    }
  return acc / (static_cast<double>(w) * h);
}

Image resample(const Image& img, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) throw std::invalid_argument("resample: target size must be positive");
  if (new_width == img.width() && new_height == img.height()) return img;
  auto source_coord = [](int i, int src, int dst) {
    if (dst == 1) return 0.5 * (src - 1);
    return static_cast<double>(i) * (src - 1) / (dst - 1);
  };
  Image out(new_width, new_height);
  for (int y = 0; y < new_height; ++y) {
    const double sy = source_coord(y, img.height(), new_height);
    const int y0 = std::min(static_cast<int>(std::floor(sy)), img.height() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double sx = source_coord(x, img.width(), new_width);
      const int x0 = std::min(static_cast<int>(std::floor(sx)), img.width() - 1);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double top = img.at(x0, y0, c) + fx * (img.at(x1, y0, c) - img.at(x0, y0, c));
        const double bottom = img.at(x0, y1, c) + fx * (img.at(x1, y1, c) - img.at(x0, y1, c));
        out.at(x, y, c) = top + fy * (bottom - top);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perceptual surrogate

namespace {

constexpr int kFeatureFilters = 8;
constexpr int kFeatureLevels = 3;
constexpr int kMinPerceptualSide = 16;
using Filter = std::array<double, Image::kChannels * 9>;

const std::array<Filter, kFeatureFilters>& feature_filters() {
  static const auto filters = [] {
    std::array<Filter, kFeatureFilters> out{};
    Rng rng(0, RngComponent::kPerceptual, 0);
    for (auto& f : out) {
      double norm = 0.0;
      for (double& w : f) {
        w = rng.normal();
        norm += w * w;
      }
      norm = std::sqrt(norm);
      for (double& w : f) w /= norm;
    }
    return out;
  }();
  return filters;
}

// Edge-clamped copy with a one-pixel border, channel-interleaved.
std::vector<double> pad_clamped(const Image& img) {
  const int w = img.width();
  const int h = img.height();
  std::vector<double> out(static_cast<std::size_t>(w + 2) * (h + 2) * Image::kChannels);
  std::size_t k = 0;
  for (int y = -1; y <= h; ++y)
    for (int x = -1; x <= w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) out[k++] = img.at_clamped(x, y, c);
  return out;
}

// Responses of all filters at (x, y) of a padded image.
void filter_responses(const std::vector<double>& padded, int w, int x, int y,
                      const std::array<Filter, kFeatureFilters>& filters, std::array<double, kFeatureFilters>& out) {
  const auto stride = static_cast<std::size_t>(w + 2) * Image::kChannels;
  std::array<double, Image::kChannels * 9> taps{};
  for (int dy = 0; dy < 3; ++dy) {
    const double* row = padded.data() + static_cast<std::size_t>(y + dy) * stride + static_cast<std::size_t>(x) * Image::kChannels;
    for (int dx = 0; dx < 3; ++dx)
      for (int c = 0; c < Image::kChannels; ++c) taps[static_cast<std::size_t>(c * 9 + dy * 3 + dx)] = row[dx * Image::kChannels + c];
  }
  for (std::size_t f = 0; f < filters.size(); ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) acc += filters[f][i] * taps[i];
    out[f] = acc;
  }
}

Image downsample2(const Image& img) {
  const int w = std::max(1, img.width() / 2);
  const int h = std::max(1, img.height() / 2);
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c)
        out.at(x, y, c) = 0.25 * (img.at_clamped(2 * x, 2 * y, c) + img.at_clamped(2 * x + 1, 2 * y, c) +
                                  img.at_clamped(2 * x, 2 * y + 1, c) + img.at_clamped(2 * x + 1, 2 * y + 1, c));
  return out;
}

// Adjoint of downsample2 for even-or-floor sizes: spreads each coarse gradient
// over the 2x2 block it averaged.
void downsample2_backward(const Image& coarse_grad, Image& fine_grad) {
  for (int y = 0; y < coarse_grad.height(); ++y)
    for (int x = 0; x < coarse_grad.width(); ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        const double g = 0.25 * coarse_grad.at(x, y, c);
        for (int oy = 0; oy < 2; ++oy)
          for (int ox = 0; ox < 2; ++ox) {
            const int fx = std::min(2 * x + ox, fine_grad.width() - 1);
            const int fy = std::min(2 * y + oy, fine_grad.height() - 1);
            fine_grad.at(fx, fy, c) += g;
          }
      }
}

double perceptual_impl(const Image& a, const Image& b, Image* grad_a) {
  require_same_shape(a, b, "perceptual_dist");
  if (std::min(a.width(), a.height()) < kMinPerceptualSide)
    throw std::invalid_argument("perceptual_dist: image side must be at least 16 pixels");
  const auto& filters = feature_filters();

  std::array<Image, kFeatureLevels> pa;
  std::array<Image, kFeatureLevels> pb;
  pa[0] = a;
  pb[0] = b;
  for (int l = 1; l < kFeatureLevels; ++l) {
    pa[static_cast<std::size_t>(l)] = downsample2(pa[static_cast<std::size_t>(l - 1)]);
    pb[static_cast<std::size_t>(l)] = downsample2(pb[static_cast<std::size_t>(l - 1)]);
  }

  double total = 0.0;
  std::array<Image, kFeatureLevels> level_grads;
  for (int l = 0; l < kFeatureLevels; ++l) {
    const Image& la = pa[static_cast<std::size_t>(l)];
    const Image& lb = pb[static_cast<std::size_t>(l)];
    const int w = la.width();
    const int h = la.height();
    const double count = static_cast<double>(w) * h * kFeatureFilters;
    if (grad_a) level_grads[static_cast<std::size_t>(l)] = Image(w, h);
    double level = 0.0;
    const auto pad_a = pad_clamped(la);
    const auto pad_b = pad_clamped(lb);
    std::vector<double> pad_grad;
    if (grad_a) pad_grad.assign(pad_a.size(), 0.0);
    const auto stride = static_cast<std::size_t>(w + 2) * Image::kChannels;
    std::array<double, kFeatureFilters> ra{};
    std::array<double, kFeatureFilters> rb{};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        filter_responses(pad_a, w, x, y, filters, ra);
        filter_responses(pad_b, w, x, y, filters, rb);
        for (std::size_t f = 0; f < filters.size(); ++f) {
          const double d = std::abs(ra[f]) - std::abs(rb[f]);
          level += d * d;
          if (!grad_a || ra[f] == 0.0) continue;
          const double g = 2.0 * d * (ra[f] > 0.0 ? 1.0 : -1.0) / (count * kFeatureLevels);
          for (int dy = 0; dy < 3; ++dy) {
            double* row = pad_grad.data() + static_cast<std::size_t>(y + dy) * stride + static_cast<std::size_t>(x) * Image::kChannels;
            for (int dx = 0; dx < 3; ++dx)
              for (int c = 0; c < Image::kChannels; ++c)
                row[dx * Image::kChannels + c] += g * filters[f][static_cast<std::size_t>(c * 9 + dy * 3 + dx)];
          }
        }
      }
    if (grad_a) {
      // Fold the border back onto the edge pixels it was clamped from.
      Image& lg = level_grads[static_cast<std::size_t>(l)];
      std::size_t k = 0;
      for (int y = -1; y <= h; ++y)
        for (int x = -1; x <= w; ++x)
          for (int c = 0; c < Image::kChannels; ++c)
            lg.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1), c) += pad_grad[k++];
    }
    total += level / count;
  }

  if (grad_a) {
    for (int l = kFeatureLevels - 1; l > 0; --l)
      downsample2_backward(level_grads[static_cast<std::size_t>(l)], level_grads[static_cast<std::size_t>(l - 1)]);
    *grad_a = std::move(level_grads[0]);
  }
  return total / kFeatureLevels;
}

}  // namespace

double perceptual_dist(const Image& a, const Image& b) { return perceptual_impl(a, b, nullptr); }

double perceptual_dist_grad(const Image& a, const Image& b, Image& grad_a) { return perceptual_impl(a, b, &grad_a); }

// ---------------------------------------------------------------------------
// PPM

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  const auto values = img.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::floor(std::clamp(values[i], 0.0, 1.0) * 255.0 + 0.5));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w < 1 || h < 1) throw std::runtime_error(path.string() + ": not a P6/255 PPM");
  in.get();
  Image img(w, h);
  std::vector<unsigned char> bytes(img.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated pixel data");
  auto values = img.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) values[i] = bytes[i] / 255.0;
  return img;
}

}  // namespace distillab
