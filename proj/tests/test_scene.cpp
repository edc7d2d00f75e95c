// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "distillab/scene.hpp"
#include "test_util.hpp"

using namespace distillab;

TEST_CASE("camera_grid spacing and order") {
  GridParams g;
  g.n_az = 3;
  g.n_el = 2;
  const auto cams = camera_grid(g);
  REQUIRE(cams.size() == 6);
  CHECK(cams[0].azimuth_deg == -22.5);
  CHECK(cams[1].azimuth_deg == 0.0);
  CHECK(cams[2].azimuth_deg == 22.5);
  // elevation is the outer loop
  CHECK(cams[0].elevation_deg == -10.0);
  CHECK(cams[2].elevation_deg == -10.0);
  CHECK(cams[3].elevation_deg == 10.0);
  CHECK(cams[3].azimuth_deg == -22.5);
  CHECK(camera_grid(g) == cams);
}

TEST_CASE("camera_grid single camera sits at the midpoint") {
  GridParams g;
  g.n_az = 1;
  g.n_el = 1;
  const auto cams = camera_grid(g);
  REQUIRE(cams.size() == 1);
  CHECK(cams[0].azimuth_deg == 0.0);
  CHECK(cams[0].elevation_deg == 0.0);
}

TEST_CASE("camera_grid 20x20 frontal configuration") {
  GridParams g;
  g.n_az = 20;
  g.n_el = 20;
  const auto cams = camera_grid(g);
  REQUIRE(cams.size() == 400);
  CHECK(cams.front().azimuth_deg == doctest::Approx(-22.5));
  CHECK(cams.front().elevation_deg == doctest::Approx(-10.0));
  CHECK(cams[19].azimuth_deg == doctest::Approx(22.5));
  CHECK(cams[380].elevation_deg == doctest::Approx(10.0));
  CHECK(cams.back().azimuth_deg == doctest::Approx(22.5));
  CHECK(cams.back().elevation_deg == doctest::Approx(10.0));
  for (const auto& c : cams) {
    CHECK(c.radius == 2.5);
    CHECK(c.fov_y_deg == 40.0);
  }
}

TEST_CASE("camera looks at the origin") {
  Camera c;
  c.azimuth_deg = 17.0;
  c.elevation_deg = -8.0;
  c.width = 9;
  c.height = 9;
  const Ray r = c.pixel_ray(4, 4);
  const Vec3 to_origin = (Vec3{} - c.position()).normalized();
  CHECK(r.direction.dot(to_origin) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.position().norm() == doctest::Approx(2.5));
  // pixel rows grow downward
  CHECK(c.pixel_ray(4, 0).direction.y > c.pixel_ray(4, 8).direction.y);
  const PixelRays fast(c);
  const Ray a = fast(2, 7);
  const Ray b = c.pixel_ray(2, 7);
  CHECK(a.direction.x == doctest::Approx(b.direction.x).epsilon(1e-12));
  CHECK(a.direction.z == doctest::Approx(b.direction.z).epsilon(1e-12));
  Camera bad = c;
  bad.fov_y_deg = 130.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("holdout cameras") {
  const GridParams g;
  const auto first = holdout_cameras(g, 1, 0);
  REQUIRE(first.size() == 1);
  CHECK(first[0].azimuth_deg == doctest::Approx(13.616474430306244).epsilon(1e-12));
  CHECK(first[0].elevation_deg == doctest::Approx(-0.78646176331434559).epsilon(1e-12));

  const auto many = holdout_cameras(g, 32, 5);
  CHECK(many == holdout_cameras(g, 32, 5));
  CHECK_FALSE(many == holdout_cameras(g, 32, 6));
  const double cell_az = 45.0 / 7.0;
  const double cell_el = 20.0 / 7.0;
  for (const auto& h : many) {
    CHECK(h.azimuth_deg >= -22.5);
    CHECK(h.azimuth_deg <= 22.5);
    CHECK(h.elevation_deg >= -10.0);
    CHECK(h.elevation_deg <= 10.0);
    for (const auto& n : camera_grid(g)) {
      const double da = (h.azimuth_deg - n.azimuth_deg) / cell_az;
      const double de = (h.elevation_deg - n.elevation_deg) / cell_el;
      CHECK(std::hypot(da, de) >= 0.25);
    }
  }
  CHECK_THROWS(holdout_cameras(g, 0, 0));

  GridParams point;
  point.n_az = 1;
  point.n_el = 1;
  point.az_range = {5.0, 5.0};
  point.el_range = {0.0, 0.0};
  CHECK_THROWS_AS(holdout_cameras(point, 1, 0), std::runtime_error);
}

TEST_CASE("bake_scene") {
  SUBCASE("empty scene") {
    const auto f = bake_scene(SceneSpec{}, 8);
    for (float v : f.density()) CHECK(v == 0.0f);
    for (float v : f.color()) CHECK(v == 0.0f);
  }
  SUBCASE("single blob closed form") {
    // resolution 9 puts nodes at multiples of 0.25
    SceneSpec spec;
    spec.blobs.push_back({{0.0, 0.0, 0.0}, {0.25, 0.5, 0.25}, {0.2, 0.4, 0.6}, 20.0});
    const auto f = bake_scene(spec, 9);
    CHECK(f.parameterization() == Parameterization::kDirect);
    CHECK(f.sigma_at_node(f.node_index(4, 4, 4)) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(f.sigma_at_node(f.node_index(5, 4, 4)) == doctest::Approx(20.0 * 0.6065306597).epsilon(1e-6));
    CHECK(f.sigma_at_node(f.node_index(4, 6, 4)) == doctest::Approx(20.0 * 0.6065306597).epsilon(1e-6));
    const auto c = f.color_at_node(f.node_index(5, 4, 4));
    CHECK(c[2] == doctest::Approx(0.6).epsilon(1e-6));
  }
  SUBCASE("density capped") {
    SceneSpec spec;
    spec.blobs.push_back({{0.0, 0.0, 0.0}, {0.3, 0.3, 0.3}, {1, 1, 1}, 45.0});
    spec.blobs.push_back({{0.0, 0.0, 0.0}, {0.3, 0.3, 0.3}, {0, 0, 0}, 45.0});
    const auto f = bake_scene(spec, 9);
    const auto centre = f.node_index(4, 4, 4);
    CHECK(f.sigma_at_node(centre) == doctest::Approx(kSigmaMax));
    // color is the density-weighted average
    CHECK(f.color_at_node(centre)[0] == doctest::Approx(0.5).epsilon(1e-6));
  }
  SUBCASE("mass converges with resolution") {
    const auto spec = generate_scene(0);
    for (int r : {24, 32, 48}) {
      const double a = density_mass(bake_scene(spec, r));
      const double b = density_mass(bake_scene(spec, 2 * r));
      CHECK(std::abs(a - b) / b < 0.05);
    }
  }
}

TEST_CASE("generated scenes") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const auto spec = generate_scene(s);
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.blobs.size() >= 4);
    CHECK(spec.seed == s);
    bool thin = false;
    for (const auto& b : spec.blobs) {
      CHECK(b.peak_density > 0.0);
      const double lo = std::min({b.radii.x, b.radii.y, b.radii.z});
      const double hi = std::max({b.radii.x, b.radii.y, b.radii.z});
      if (hi >= 2.0 * lo && b.center.z > 0.25) thin = true;
    }
    CHECK(thin);
  }
  SceneSpec bad;
  bad.blobs.push_back({{0.9, 0.0, 0.0}, {0.3, 0.3, 0.3}});
  CHECK_THROWS(bad.validate());
  bad.blobs[0] = {{0.0, 0.0, 0.0}, {0.3, 0.3, 0.3}, {0, 0, 0}, 0.0};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("scene json round trip") {
  distillab::testing::TempDir dir("scene");
  const auto spec = generate_scene(3);
  save_scene(spec, dir.path() / "s.json");
  const auto back = load_scene(dir.path() / "s.json");
  REQUIRE(back.blobs.size() == spec.blobs.size());
  CHECK(back.seed == 3);
  for (std::size_t i = 0; i < spec.blobs.size(); ++i) {
    CHECK(back.blobs[i].center.x == spec.blobs[i].center.x);
    CHECK(back.blobs[i].radii.z == spec.blobs[i].radii.z);
    CHECK(back.blobs[i].color[1] == spec.blobs[i].color[1]);
    CHECK(back.blobs[i].peak_density == spec.blobs[i].peak_density);
  }
  CHECK(bake_scene(back, 16) == bake_scene(spec, 16));

  nlohmann::json j = spec;
  CHECK(j.contains("seed"));
  CHECK(j["blobs"][0].contains("peak_density"));
  CHECK_THROWS(load_scene(dir.path() / "nope.json"));
}

TEST_CASE("ground-truth renders are frozen") {
  struct Frozen {
    std::uint64_t seed;
    double mean;
    double centre[3];
    double corner;
  };
  const Frozen frozen[] = {
      {0, 0.86587296977187245, {0.67746089889275818, 0.55723402163676283, 0.40659475041293652}, 0.99925645514904726},
      {1, 0.86037792902810128, {0.60840829843815003, 0.46288776809412391, 0.44374450913497426}, 0.99901487165649661},
      {2, 0.86558356804149794, {0.76097476614271664, 0.52967154835158947, 0.41807884292369513}, 0.99896378457363999},
  };
  Camera cam;
  cam.width = 16;
  cam.height = 16;
  for (const auto& f : frozen) {
    const auto field = bake_scene(generate_scene(f.seed), 32);
    const auto imgs = render_gt(field, {cam}, RenderConfig{});
    REQUIRE(imgs.size() == 1);
    const Image& img = imgs[0];
    CHECK(distillab::testing::mean_value(img) == doctest::Approx(f.mean).epsilon(1e-6));
    for (int c = 0; c < 3; ++c) CHECK(img.at(8, 8, c) == doctest::Approx(f.centre[c]).epsilon(1e-6));
    CHECK(img.at(2, 13, 1) == doctest::Approx(f.corner).epsilon(1e-6));
    // head is darker than the white background
    CHECK(img.at(8, 8, 0) < img.at(0, 0, 0));
  }
}
