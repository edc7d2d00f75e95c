// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "distillab/camera.hpp"
#include "distillab/field.hpp"

namespace distillab {

struct GridParams {
  int n_az = 8;
  int n_el = 8;
  std::array<double, 2> az_range{-22.5, 22.5};
  std::array<double, 2> el_range{-10.0, 10.0};
  double radius = 2.5;
  double fov_y_deg = 40.0;
  int width = 64;
  int height = 64;
};

/// Regular azimuth x elevation grid spanning both closed ranges. Elevation is
/// the outer loop, azimuth the inner.
std::vector<Camera> camera_grid(const GridParams& grid);

/// k cameras drawn uniformly inside the grid ranges, each at least a quarter
/// grid cell away from every grid node.
std::vector<Camera> holdout_cameras(const GridParams& grid, int k, std::uint64_t seed);

struct Blob3 {
  Vec3 center;
  Vec3 radii;
  Rgb color{0.5, 0.5, 0.5};
  double peak_density = 30.0;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::vector<Blob3> blobs;

  void validate() const;
};

inline constexpr double kSigmaMax = 50.0;

/// Gaussian-blob head proxy: a main body, a thin protruding "tongue", eyes
/// and a scatter of small colored surface details.
SceneSpec generate_scene(std::uint64_t seed);

/// Evaluates the blob mixture at every node into a directly-parameterized field.
VoxelField bake_scene(const SceneSpec& spec, int resolution);

/// Integrated density over the cube (trapezoid-free node sum times cell volume).
double density_mass(const VoxelField& field);

std::vector<Image> render_gt(const VoxelField& field, const std::vector<Camera>& cameras, const RenderConfig& cfg);

void to_json(nlohmann::json& j, const SceneSpec& spec);
void from_json(const nlohmann::json& j, SceneSpec& spec);
void to_json(nlohmann::json& j, const GridParams& grid);
void from_json(const nlohmann::json& j, GridParams& grid);

SceneSpec load_scene(const std::filesystem::path& path);
void save_scene(const SceneSpec& spec, const std::filesystem::path& path);

}  // namespace distillab
