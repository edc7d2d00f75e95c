// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "distillab/parallel.hpp"
#include "distillab/rng.hpp"

namespace distillab {
namespace {

std::vector<double> axis_values(int n, const std::array<double, 2>& range) {
  if (n < 1) throw std::invalid_argument("camera grid counts must be at least 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = 0.5 * (range[0] + range[1]);
    return out;
  }
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = range[0] + (range[1] - range[0]) * i / (n - 1);
  return out;
}

double cell_size(int n, const std::array<double, 2>& range) {
  const double span = range[1] - range[0];
  return n > 1 ? span / (n - 1) : span;
}

Camera make_camera(const GridParams& g, double az, double el) {
  Camera c;
  c.azimuth_deg = az;
  c.elevation_deg = el;
  c.radius = g.radius;
  c.fov_y_deg = g.fov_y_deg;
  c.width = g.width;
  c.height = g.height;
  c.validate();
  return c;
}

}  // namespace

std::vector<Camera> camera_grid(const GridParams& grid) {
  const auto azimuths = axis_values(grid.n_az, grid.az_range);
  const auto elevations = axis_values(grid.n_el, grid.el_range);
  std::vector<Camera> cams;
  cams.reserve(azimuths.size() * elevations.size());
  for (double el : elevations)
    for (double az : azimuths) cams.push_back(make_camera(grid, az, el));
  return cams;
}

std::vector<Camera> holdout_cameras(const GridParams& grid, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("holdout count must be at least 1");
  const auto nodes = camera_grid(grid);
  const double cell_az = cell_size(grid.n_az, grid.az_range);
  const double cell_el = cell_size(grid.n_el, grid.el_range);
  Rng rng(seed, RngComponent::kHoldout, 0);
  std::vector<Camera> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < k) {
    if (++attempts > 10000) throw std::runtime_error("holdout_cameras: ranges too tight for a quarter-cell margin");
    const double az = rng.uniform(grid.az_range[0], grid.az_range[1]);
    const double el = rng.uniform(grid.el_range[0], grid.el_range[1]);
    const bool clear = std::all_of(nodes.begin(), nodes.end(), [&](const Camera& n) {
      const double da = cell_az > 0.0 ? (az - n.azimuth_deg) / cell_az : 0.0;
      const double de = cell_el > 0.0 ? (el - n.elevation_deg) / cell_el : 0.0;
      return std::sqrt(da * da + de * de) >= 0.25;
    });
    if (clear) out.push_back(make_camera(grid, az, el));
  }
  return out;
}

void SceneSpec::validate() const {
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const auto& b = blobs[i];
    const std::string where = "blob " + std::to_string(i);
    if (!(b.peak_density > 0.0)) throw std::invalid_argument(where + ": peak_density must be positive");
    if (!(b.radii.x > 0.0 && b.radii.y > 0.0 && b.radii.z > 0.0))
      throw std::invalid_argument(where + ": radii must be positive");
    if (b.center.norm() + std::max({b.radii.x, b.radii.y, b.radii.z}) > 1.0 + 1e-9)
      throw std::invalid_argument(where + ": extends outside the unit bounding region");
  }
}

SceneSpec generate_scene(std::uint64_t seed) {
  Rng rng(seed, RngComponent::kScene, 0);
  auto jitter = [&](double v, double amount) { return std::clamp(v + rng.uniform(-amount, amount), 0.02, 0.98); };
  SceneSpec spec;
  spec.seed = seed;

  const Rgb skin{jitter(0.85, 0.08), jitter(0.65, 0.08), jitter(0.52, 0.08)};
  // Radii are Gaussian standard deviations; the visible surface sits near two radii.
  const Vec3 body_radii{0.18, 0.22, 0.19};
  spec.blobs.push_back({{0.0, 0.0, 0.0}, body_radii, skin, 40.0});
  spec.blobs.push_back({{0.0, 0.12, -0.04},
                        {0.19, 0.13, 0.17},
                        {jitter(0.30, 0.1), jitter(0.20, 0.08), jitter(0.12, 0.06)},
                        40.0});
  // Thin protruding part attached below the mouth.
  spec.blobs.push_back({{0.0, -0.12, 0.34}, {0.03, 0.02, 0.075}, {0.85, 0.22, 0.28}, 50.0});
  for (double side : {-1.0, 1.0})
    spec.blobs.push_back({{0.07 * side, 0.05, 0.34}, {0.028, 0.02, 0.015}, {0.08, 0.08, 0.14}, 50.0});
  spec.blobs.push_back({{0.0, -0.01, 0.37}, {0.024, 0.038, 0.03}, {skin[0] * 0.9, skin[1] * 0.85, skin[2] * 0.85}, 45.0});

  // Small surface details on the frontal hemisphere.
  const int details = 14;
  for (int i = 0; i < details; ++i) {
    Vec3 dir;
    do {
      dir = {rng.uniform(-1.0, 1.0), rng.uniform(-0.8, 0.6), rng.uniform(0.35, 1.0)};
    } while (dir.norm() < 1e-3);
    dir = dir.normalized();
    const double scale = 1.0 / std::sqrt((dir.x / body_radii.x) * (dir.x / body_radii.x) +
                                         (dir.y / body_radii.y) * (dir.y / body_radii.y) +
                                         (dir.z / body_radii.z) * (dir.z / body_radii.z));
    const Vec3 center = dir * (1.9 * scale);
    const double r = rng.uniform(0.03, 0.045);
    spec.blobs.push_back({center, {r, r, r}, {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)}, 50.0});
  }
  spec.validate();
  return spec;
}

VoxelField bake_scene(const SceneSpec& spec, int resolution) {
  if (resolution < 8) throw std::invalid_argument("bake_scene: resolution must be at least 8");
  spec.validate();
  VoxelField field(resolution, Parameterization::kDirect, 0.0f, 0.0f);
  auto density = field.density();
  auto color = field.color();
  parallel_for(static_cast<std::size_t>(resolution), [&](std::size_t slab) {
    const int k = static_cast<int>(slab);
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const Vec3 p{field.node_coord(i), field.node_coord(j), field.node_coord(k)};
        double total = 0.0;
        Rgb weighted{0.0, 0.0, 0.0};
        for (const auto& b : spec.blobs) {
          const Vec3 d = p - b.center;
          const double q = (d.x / b.radii.x) * (d.x / b.radii.x) + (d.y / b.radii.y) * (d.y / b.radii.y) +
                           (d.z / b.radii.z) * (d.z / b.radii.z);
          const double s = b.peak_density * std::exp(-0.5 * q);
          total += s;
          for (std::size_t c = 0; c < 3; ++c) weighted[c] += s * b.color[c];
        }
        const std::size_t node = field.node_index(i, j, k);
        density[node] = static_cast<float>(std::min(total, kSigmaMax));
        if (total > 0.0)
          for (std::size_t c = 0; c < 3; ++c) color[3 * node + c] = static_cast<float>(weighted[c] / total);
      }
  });
  return field;
}

double density_mass(const VoxelField& field) {
  double sum = 0.0;
  for (std::size_t n = 0; n < field.node_count(); ++n) sum += field.sigma_at_node(n);
  const double h = field.spacing();
  return sum * h * h * h;
}

std::vector<Image> render_gt(const VoxelField& field, const std::vector<Camera>& cameras, const RenderConfig& cfg) {
  std::vector<Image> out;
  out.reserve(cameras.size());
  for (const auto& cam : cameras) out.push_back(render_view(field, cam, cfg));
  return out;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void to_json(nlohmann::json& j, const SceneSpec& spec) {
  j = nlohmann::json::object();
  j["seed"] = spec.seed;
  j["blobs"] = nlohmann::json::array();
  for (const auto& b : spec.blobs) {
    j["blobs"].push_back({{"center", vec_json(b.center)},
                          {"radii", vec_json(b.radii)},
                          {"color", nlohmann::json::array({b.color[0], b.color[1], b.color[2]})},
                          {"peak_density", b.peak_density}});
  }
}

void from_json(const nlohmann::json& j, SceneSpec& spec) {
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.blobs.clear();
  for (const auto& jb : j.at("blobs")) {
    Blob3 b;
    b.center = vec_from(jb.at("center"));
    b.radii = vec_from(jb.at("radii"));
    const Vec3 c = vec_from(jb.at("color"));
    b.color = {c.x, c.y, c.z};
    b.peak_density = jb.at("peak_density").get<double>();
    spec.blobs.push_back(b);
  }
}

void to_json(nlohmann::json& j, const GridParams& g) {
  j = {{"n_az", g.n_az},         {"n_el", g.n_el},           {"az_range", g.az_range}, {"el_range", g.el_range},
       {"radius", g.radius},     {"fov_y", g.fov_y_deg},     {"width", g.width},       {"height", g.height}};
}

void from_json(const nlohmann::json& j, GridParams& g) {
  g.n_az = j.value("n_az", g.n_az);
  g.n_el = j.value("n_el", g.n_el);
  g.az_range = j.value("az_range", g.az_range);
  g.el_range = j.value("el_range", g.el_range);
  g.radius = j.value("radius", g.radius);
  g.fov_y_deg = j.value("fov_y", g.fov_y_deg);
  g.width = j.value("width", g.width);
  g.height = j.value("height", g.height);
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file " + path.string());
  SceneSpec spec = nlohmann::json::parse(in).get<SceneSpec>();
  spec.validate();
  return spec;
}

void save_scene(const SceneSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << nlohmann::json(spec).dump(2) << '\n';
}

}  // namespace distillab
