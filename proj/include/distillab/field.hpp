// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "distillab/camera.hpp"
#include "distillab/image.hpp"

namespace distillab {

using Rgb = std::array<double, 3>;

/// How stored grid values map to density and color.
enum class Parameterization : std::uint32_t {
  /// Stored values are sigma and color directly. Used for baked ground truth.
  kDirect = 0,
  /// sigma = softplus(raw), color = sigmoid(raw). Used for optimized fields.
  kRaw = 1,
};

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

/// Dual density/color grid over [-1,1]^3 with R nodes per axis. Values are
/// interpolated trilinearly at the node lattice, then activated.
class VoxelField {
 public:
  VoxelField() = default;
  VoxelField(int resolution, Parameterization parameterization, float density_fill, float color_fill);

  /// Raw-parameterized field with uniform density sigma and gray color 0.5.
  static VoxelField optimizable(int resolution, double initial_sigma);

  int resolution() const { return resolution_; }
  Parameterization parameterization() const { return parameterization_; }
  std::size_t node_count() const { return density_.size(); }

  std::span<float> density() { return density_; }
  std::span<const float> density() const { return density_; }
  std::span<float> color() { return color_; }
  std::span<const float> color() const { return color_; }

  std::size_t node_index(int i, int j, int k) const {
    const auto r = static_cast<std::size_t>(resolution_);
    return (static_cast<std::size_t>(k) * r + static_cast<std::size_t>(j)) * r + static_cast<std::size_t>(i);
  }
  /// World coordinate of node index i along any axis.
  double node_coord(int i) const { return -1.0 + 2.0 * i / (resolution_ - 1); }
  double spacing() const { return 2.0 / (resolution_ - 1); }

  /// Activated density at a node.
  double sigma_at_node(std::size_t node) const;
  Rgb color_at_node(std::size_t node) const;

  bool operator==(const VoxelField&) const = default;

 private:
  int resolution_ = 0;
  Parameterization parameterization_ = Parameterization::kRaw;
  std::vector<float> density_;
  std::vector<float> color_;  // node-major, 3 floats per node
};

struct FieldSample {
  double sigma = 0.0;
  Rgb color{0.0, 0.0, 0.0};
};

/// Out-of-bounds positions return sigma = 0, color = 0.
FieldSample sample_trilinear(const VoxelField& field, const Vec3& p);

struct RenderConfig {
  int samples_per_ray = 48;
  double near = 0.75;
  double far = 4.25;
  Rgb background{1.0, 1.0, 1.0};
  /// Marching stops once transmittance falls below this value. Zero disables
  /// early termination.
  double termination = 1e-4;

  double step() const { return (far - near) / samples_per_ray; }
  void validate() const;
};

struct CompositeSample {
  double sigma = 0.0;
  Rgb color{0.0, 0.0, 0.0};
  double delta = 0.0;
};

struct Composite {
  Rgb color{0.0, 0.0, 0.0};
  double opacity = 0.0;
};

/// Front-to-back alpha compositing over the background.
Composite composite_ray(std::span<const CompositeSample> samples, const Rgb& background);

Image render_view(const VoxelField& field, const Camera& camera, const RenderConfig& cfg);
/// Renders only the requested patches; bit-identical to crops of render_view.
std::vector<Image> render_patches(const VoxelField& field, const Camera& camera, const RenderConfig& cfg,
                                  std::span<const PatchSpec> patches);

/// A patch of one camera in a multi-view batch.
struct ViewPatch {
  std::size_t camera = 0;
  PatchSpec patch;
};

std::vector<Image> render_batch(const VoxelField& field, std::span<const Camera> cameras, const RenderConfig& cfg,
                                std::span<const ViewPatch> patches);

struct FieldGrad {
  std::vector<double> density;
  std::vector<double> color;

  bool is_zero() const;
};

/// Gradients of sum(pixel_grads * rendered pixels) w.r.t. the stored grid
/// values. Accumulation order is fixed (per-lane buffers reduced in lane
/// order), so the result does not depend on the thread count.
FieldGrad backward(const VoxelField& field, std::span<const Camera> cameras, const RenderConfig& cfg,
                   std::span<const ViewPatch> patches, std::span<const Image> pixel_grads);
FieldGrad backward(const VoxelField& field, const Camera& camera, const RenderConfig& cfg, const Image& pixel_grads);

struct AdamState {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update. Moments are lazily sized on first use.
void adam_step(std::span<float> params, std::span<const double> grads, AdamState& state);

/// Adam over both grids of a field.
class FieldOptimizer {
 public:
  explicit FieldOptimizer(double lr = 1e-2, double beta1 = 0.9, double beta2 = 0.99, double epsilon = 1e-8);
  void step(VoxelField& field, const FieldGrad& grad);
  long steps() const { return density_.step; }

 private:
  AdamState density_;
  AdamState color_;
};

void save_field(const VoxelField& field, const std::filesystem::path& path);
VoxelField load_field(const std::filesystem::path& path);

}  // namespace distillab
