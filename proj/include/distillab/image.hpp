// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace distillab {

/// Three-channel image, row-major, interleaved RGB. Nominal range is [0,1] but
/// values are not clamped on write: noisy diffusion states live here too.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Image& other) const { return width_ == other.width_ && height_ == other.height_; }

  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  /// Clamp-to-edge read.
  double at_clamped(int x, int y, int c) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * kChannels +
           static_cast<std::size_t>(c);
  }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Square patch at (row, col) of a parent image.
struct PatchSpec {
  int row = 0;
  int col = 0;
  int size = 1;

  bool fits(int width, int height) const {
    return size >= 1 && row >= 0 && col >= 0 && row + size <= height && col + size <= width;
  }
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_same_shape(const Image& a, const Image& b, const char* what);

Image crop(const Image& img, const PatchSpec& patch);
Image clamped(const Image& img);

/// Separable Gaussian, kernel truncated at ceil(3 sigma), clamp-to-edge.
Image gaussian_blur(const Image& img, double sigma);
/// Normalized 1D taps, index 0 is offset -radius.
std::vector<double> gaussian_kernel(double sigma);

struct Bands {
  Image low;
  Image high;
};
Bands split_bands(const Image& img, double sigma);

/// Mean of squared values of the high band, i.e. energy above the blur cutoff.
double high_frequency_energy(const Image& img, double sigma);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();
inline constexpr double kPsnrCsvCap = 99.0;

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b);
/// Gaussian-window SSIM (11x11, sigma 1.5) over the valid region, averaged
/// over channels.
double ssim(const Image& a, const Image& b);
double saturation_metric(const Image& img);
/// Bilinear resampling with corner-aligned sample positions.
Image resample(const Image& img, int new_width, int new_height);

/// Fixed random-feature pyramid distance. Used as the perceptual term of the
/// reconstruction loss.
double perceptual_dist(const Image& a, const Image& b);
/// Returns the distance and writes d(distance)/d(a) into grad_a.
double perceptual_dist_grad(const Image& a, const Image& b, Image& grad_a);

/// Binary PPM (P6, maxval 255).
void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace distillab
