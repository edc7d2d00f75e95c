// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace distillab {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const { return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x}; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this * (1.0 / norm()); }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// Pinhole camera orbiting the origin. Azimuth rotates about +Y starting from
/// +Z (frontal), elevation tilts toward +Y. Always looks at the origin with +Y
/// up, which is well-defined for |elevation| < 90 degrees.
struct Camera {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double radius = 2.5;
  double fov_y_deg = 40.0;
  int width = 64;
  int height = 64;

  Vec3 position() const;
  /// Ray through the center of pixel (x, y); y grows downward.
  Ray pixel_ray(int x, int y) const;
  /// Same camera at another image resolution.
  Camera with_resolution(int w, int h) const {
    Camera c = *this;
    c.width = w;
    c.height = h;
    return c;
  }
  void validate() const;

  bool operator==(const Camera&) const = default;
};

/// Precomputed view basis of a camera; generates the same rays as
/// Camera::pixel_ray without redoing the trigonometry per pixel.
class PixelRays {
 public:
  explicit PixelRays(const Camera& camera);
  Ray operator()(int x, int y) const;

 private:
  Vec3 origin_;
  Vec3 forward_;
  Vec3 right_;
  Vec3 up_;
  double tan_half_ = 0.0;
  double aspect_ = 1.0;
  int width_ = 1;
  int height_ = 1;
};

}  // namespace distillab
