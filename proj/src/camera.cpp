// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/camera.hpp"

#include <numbers>
#include <stdexcept>

namespace distillab {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

Vec3 Camera::position() const {
  const double az = azimuth_deg * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  return Vec3{std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)} * radius;
}

Ray Camera::pixel_ray(int x, int y) const { return PixelRays(*this)(x, y); }

PixelRays::PixelRays(const Camera& camera)
    : origin_(camera.position()),
      tan_half_(std::tan(0.5 * camera.fov_y_deg * kDegToRad)),
      aspect_(static_cast<double>(camera.width) / camera.height),
      width_(camera.width),
      height_(camera.height) {
  forward_ = (Vec3{} - origin_).normalized();
  right_ = forward_.cross(Vec3{0.0, 1.0, 0.0}).normalized();
  up_ = right_.cross(forward_);
}

Ray PixelRays::operator()(int x, int y) const {
  const double u = ((x + 0.5) / width_ * 2.0 - 1.0) * tan_half_ * aspect_;
  const double v = (1.0 - (y + 0.5) / height_ * 2.0) * tan_half_;
  return Ray{origin_, (forward_ + right_ * u + up_ * v).normalized()};
}

void Camera::validate() const {
  if (!(fov_y_deg > 0.0 && fov_y_deg < 120.0)) throw std::invalid_argument("camera fov_y must lie in (0, 120) degrees");
  if (!(std::abs(elevation_deg) < 90.0)) throw std::invalid_argument("camera elevation must lie in (-90, 90) degrees");
  if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be positive");
  if (!(radius > 0.0)) throw std::invalid_argument("camera radius must be positive");
}

}  // namespace distillab
