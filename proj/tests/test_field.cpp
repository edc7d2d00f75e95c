// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "distillab/blob.hpp"
#include "distillab/field.hpp"
#include "distillab/parallel.hpp"
#include "distillab/scene.hpp"
#include "test_util.hpp"

using namespace distillab;
using distillab::testing::max_abs_diff;
using distillab::testing::mean_abs_diff;

namespace {

VoxelField random_field(int res, std::uint64_t stream, double density_bias = 0.0) {
  VoxelField f = VoxelField::optimizable(res, 0.5);
  Rng rng(0, RngComponent::kTest, stream);
  for (float& v : f.density()) v = static_cast<float>(density_bias + rng.uniform(-1.0, 1.5));
  for (float& v : f.color()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  return f;
}

Camera small_camera(int size, double az = 12.0, double el = -6.0) {
  Camera c;
  c.azimuth_deg = az;
  c.elevation_deg = el;
  c.width = size;
  c.height = size;
  return c;
}

double weighted_sum(const Image& img, const Image& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) s += img.values()[i] * w.values()[i];
  return s;
}

}  // namespace

TEST_CASE("activations") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(40.0) == doctest::Approx(40.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(softplus_inverse(0.37)) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK_THROWS(softplus_inverse(0.0));
}

TEST_CASE("sample_trilinear") {
  VoxelField f(3, Parameterization::kRaw, 0.0f, 0.0f);
  f.density()[f.node_index(1, 1, 1)] = 2.0f;
  f.density()[f.node_index(2, 1, 1)] = -1.0f;
  f.color()[3 * f.node_index(2, 1, 1) + 0] = 1.5f;

  SUBCASE("at a node") {
    const auto s = sample_trilinear(f, {0.0, 0.0, 0.0});
    CHECK(s.sigma == doctest::Approx(softplus(2.0)));
    CHECK(s.color[0] == doctest::Approx(0.5));
  }
  SUBCASE("activation after interpolation") {
    const auto s = sample_trilinear(f, {0.5, 0.0, 0.0});
    CHECK(s.sigma == doctest::Approx(softplus(0.5)));
    CHECK(s.sigma != doctest::Approx(0.5 * (softplus(2.0) + softplus(-1.0))));
    CHECK(s.color[0] == doctest::Approx(sigmoid(0.75)));
  }
  SUBCASE("outside the cube") {
    CHECK(sample_trilinear(f, {1.01, 0.0, 0.0}).sigma == 0.0);
    CHECK(sample_trilinear(f, {0.0, -3.0, 0.0}).sigma == 0.0);
  }
  SUBCASE("range by construction") {
    const auto r = random_field(6, 1, -4.0);
    Rng rng(0, RngComponent::kTest, 2);
    for (int i = 0; i < 200; ++i) {
      const auto s = sample_trilinear(r, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      CHECK(s.sigma >= 0.0);
      for (double c : s.color) {
        CHECK(c > 0.0);
        CHECK(c < 1.0);
      }
    }
  }
}

TEST_CASE("composite_ray") {
  const Rgb white{1.0, 1.0, 1.0};
  SUBCASE("empty") {
    const auto c = composite_ray({}, white);
    CHECK(c.opacity == 0.0);
    CHECK(c.color == white);
  }
  SUBCASE("single sample closed form") {
    const CompositeSample s{1.0, {1.0, 0.0, 0.0}, 0.5};
    const auto c = composite_ray(std::span(&s, 1), white);
    CHECK(c.opacity == doctest::Approx(0.3934693402873666).epsilon(1e-12));
    CHECK(c.color[0] == doctest::Approx(1.0));
    CHECK(c.color[1] == doctest::Approx(0.6065306597126334).epsilon(1e-12));
    CHECK(c.color[2] == doctest::Approx(0.6065306597126334).epsilon(1e-12));
  }
  SUBCASE("three samples") {
    const CompositeSample s[] = {
        {0.4, {0.2, 0.5, 0.9}, 0.3}, {2.0, {0.7, 0.1, 0.3}, 0.25}, {0.8, {0.0, 0.9, 0.4}, 0.6}};
    const auto c = composite_ray(s, white);
    CHECK(c.color[0] == doctest::Approx(0.5997701957403861).epsilon(1e-12));
    CHECK(c.color[1] == doctest::Approx(0.6088744837586846).epsilon(1e-12));
    CHECK(c.color[2] == doctest::Approx(0.6213648319480207).epsilon(1e-12));
    CHECK(c.opacity == doctest::Approx(0.6671289163019205).epsilon(1e-12));
  }
  SUBCASE("opaque limit") {
    const CompositeSample s{100.0, {0.1, 0.2, 0.3}, 0.5};
    const auto c = composite_ray(std::span(&s, 1), white);
    CHECK(c.opacity == doctest::Approx(1.0));
    CHECK(c.color[2] == doctest::Approx(0.3));
  }
  SUBCASE("opacity monotone in each sigma") {
    Rng rng(0, RngComponent::kTest, 3);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<CompositeSample> s(5);
      for (auto& x : s) x = {rng.uniform(0, 3), {rng.uniform(), rng.uniform(), rng.uniform()}, rng.uniform(0.05, 0.3)};
      const double base = composite_ray(s, white).opacity;
      CHECK(base >= 0.0);
      CHECK(base <= 1.0);
      s[rng.index(5)].sigma += 0.5;
      CHECK(composite_ray(s, white).opacity >= base);
    }
  }
}

TEST_CASE("render_view") {
  const RenderConfig cfg;
  SUBCASE("empty field is background") {
    const VoxelField f(8, Parameterization::kDirect, 0.0f, 0.0f);
    CHECK(max_abs_diff(render_view(f, small_camera(6), cfg), Image(6, 6, 1.0)) == 0.0);
  }
  SUBCASE("single blob frozen") {
    SceneSpec spec;
    spec.blobs.push_back({{0.0, 0.0, 0.0}, {0.3, 0.3, 0.3}, {0.8, 0.2, 0.1}, 20.0});
    const Image img = render_view(bake_scene(spec, 16), small_camera(8, 0.0, 0.0), cfg);
    const double green[8][8] = {
        {0.961342001, 0.877763010, 0.739553186, 0.630298839, 0.630298839, 0.739553186, 0.877763010, 0.961342001},
        {0.877763010, 0.629722620, 0.362900339, 0.259330373, 0.259330373, 0.362900339, 0.629722620, 0.877763010},
        {0.739553186, 0.362900339, 0.210376225, 0.200518759, 0.200518759, 0.210376225, 0.362900339, 0.739553186},
        {0.630298839, 0.259330373, 0.200518759, 0.200049490, 0.200049490, 0.200518759, 0.259330373, 0.630298839},
        {0.630298839, 0.259330373, 0.200518759, 0.200049490, 0.200049490, 0.200518759, 0.259330373, 0.630298839},
        {0.739553186, 0.362900339, 0.210376225, 0.200518759, 0.200518759, 0.210376225, 0.362900339, 0.739553186},
        {0.877763010, 0.629722620, 0.362900339, 0.259330373, 0.259330373, 0.362900339, 0.629722620, 0.877763010},
        {0.961342001, 0.877763010, 0.739553186, 0.630298839, 0.630298839, 0.739553186, 0.877763010, 0.961342001},
    };
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) CHECK(img.at(x, y, 1) == doctest::Approx(green[y][x]).epsilon(2e-6));
    CHECK(img.at(3, 3, 0) == doctest::Approx(0.80001238378279016).epsilon(1e-6));
    CHECK(img.at(4, 4, 2) == doctest::Approx(0.10005567487171656).epsilon(1e-6));
    CHECK(img.at(0, 0, 1) > img.at(3, 3, 1));
  }
  SUBCASE("quadrature converges") {
    const auto gt = bake_scene(generate_scene(0), 48);
    RenderConfig twice = cfg;
    twice.samples_per_ray *= 2;
    const Camera cam = small_camera(32);
    CHECK(mean_abs_diff(render_view(gt, cam, cfg), render_view(gt, cam, twice)) < 0.01);
  }
  SUBCASE("pixels stay in range") {
    const auto f = random_field(8, 4, 1.0);
    for (double v : render_view(f, small_camera(12), cfg).values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("config validation") {
    RenderConfig bad = cfg;
    bad.samples_per_ray = 1;
    CHECK_THROWS(bad.validate());
    bad = cfg;
    bad.far = bad.near;
    CHECK_THROWS(bad.validate());
  }
}

TEST_CASE("render_patches match crops of the full render") {
  const auto f = random_field(10, 5);
  const RenderConfig cfg;
  const Camera cam = small_camera(12);
  const Image full = render_view(f, cam, cfg);
  const std::vector<PatchSpec> patches = {{0, 0, 12}, {5, 7, 1}, {0, 0, 6}, {0, 6, 6}, {6, 0, 6}, {6, 6, 6}};
  const auto out = render_patches(f, cam, cfg, patches);
  REQUIRE(out.size() == patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) CHECK(out[i] == crop(full, patches[i]));
  const std::vector<PatchSpec> outside = {{8, 8, 6}};
  CHECK_THROWS_AS(render_patches(f, cam, cfg, outside), std::out_of_range);

  const std::vector<Camera> cams = {cam, small_camera(12, -20.0, 4.0)};
  const std::vector<ViewPatch> vps = {{1, {2, 3, 5}}, {0, {4, 4, 4}}};
  const auto batch = render_batch(f, cams, cfg, vps);
  CHECK(batch[0] == crop(render_view(f, cams[1], cfg), {2, 3, 5}));
  CHECK(batch[1] == crop(full, {4, 4, 4}));
  const std::vector<ViewPatch> missing = {{2, {0, 0, 2}}};
  CHECK_THROWS(render_batch(f, cams, cfg, missing));
}

TEST_CASE("backward matches central differences") {
  const auto base = random_field(8, 6);
  const Camera cam = small_camera(4);
  const RenderConfig cfg;
  Image weights(4, 4);
  Rng rng(0, RngComponent::kTest, 7);
  for (double& v : weights.values()) v = rng.uniform(-1.0, 1.0);

  const FieldGrad grad = backward(base, cam, cfg, weights);
  REQUIRE(grad.density.size() == base.density().size());
  REQUIRE(grad.color.size() == base.color().size());

  // Pick parameters that the 16 rays actually touch, half from each grid.
  std::vector<std::size_t> dens;
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < grad.density.size(); ++i)
    if (std::abs(grad.density[i]) > 1e-3) dens.push_back(i);
  for (std::size_t i = 0; i < grad.color.size(); ++i)
    if (std::abs(grad.color[i]) > 1e-3) cols.push_back(i);
  REQUIRE(dens.size() >= 5);
  REQUIRE(cols.size() >= 5);

  const double h = 1e-3;
  auto check = [&](bool density, std::size_t idx, double analytic) {
    VoxelField plus = base;
    VoxelField minus = base;
    auto p = density ? plus.density() : plus.color();
    auto m = density ? minus.density() : minus.color();
    p[idx] += static_cast<float>(h);
    m[idx] -= static_cast<float>(h);
    const double step = static_cast<double>(p[idx]) - static_cast<double>(m[idx]);
    const double fd = (weighted_sum(render_view(plus, cam, cfg), weights) -
                       weighted_sum(render_view(minus, cam, cfg), weights)) / step;
    CAPTURE(density);
    CAPTURE(idx);
    CHECK(std::abs(analytic - fd) / std::max(std::abs(fd), 1e-2) < 1e-3);
  };
  for (int k = 0; k < 5; ++k) {
    const std::size_t i = dens[rng.index(dens.size())];
    check(true, i, grad.density[i]);
    const std::size_t j = cols[rng.index(cols.size())];
    check(false, j, grad.color[j]);
  }
}

TEST_CASE("backward special cases") {
  const auto f = random_field(8, 8);
  const Camera cam = small_camera(4);
  const RenderConfig cfg;
  CHECK(backward(f, cam, cfg, Image(4, 4)).is_zero());
  CHECK_THROWS_AS(backward(f, cam, cfg, Image(3, 4)), ShapeMismatch);

  SUBCASE("occluded color gets no gradient") {
    // an opaque wall at z = 0.5 hides the node behind it from a frontal ray
    VoxelField wall(9, Parameterization::kRaw, -30.0f, 0.0f);
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 9; ++i)
        for (int k : {5, 6}) wall.density()[wall.node_index(i, j, k)] = 200.0f;
    const std::size_t hidden = wall.node_index(4, 4, 2);
    wall.density()[hidden] = 5.0f;
    const Camera front = small_camera(5, 0.0, 0.0);
    const FieldGrad g = backward(wall, front, cfg, Image(5, 5, 1.0));
    for (int c = 0; c < 3; ++c) CHECK(std::abs(g.color[3 * hidden + c]) < 1e-20);
    CHECK(std::abs(g.color[3 * wall.node_index(4, 4, 6) + 0]) > 1e-3);
  }
}

TEST_CASE("backward is independent of the thread count") {
  const auto f = random_field(12, 9);
  const std::vector<Camera> cams = {small_camera(16), small_camera(16, -15.0, 8.0)};
  const std::vector<ViewPatch> vps = {{0, {0, 0, 16}}, {1, {3, 2, 8}}, {1, {8, 8, 8}}};
  std::vector<Image> grads;
  for (std::size_t i = 0; i < vps.size(); ++i) grads.push_back(distillab::testing::noise_image(vps[i].patch.size, vps[i].patch.size, 20 + i));
  FieldGrad one;
  std::vector<Image> r1;
  {
    ThreadScope scope(1);
    one = backward(f, cams, RenderConfig{}, vps, grads);
    r1 = render_batch(f, cams, RenderConfig{}, vps);
  }
  ThreadScope scope(4);
  const FieldGrad four = backward(f, cams, RenderConfig{}, vps, grads);
  CHECK(one.density == four.density);
  CHECK(one.color == four.color);
  CHECK(r1 == render_batch(f, cams, RenderConfig{}, vps));
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters") {
    std::vector<float> p = {0.5f, -1.0f};
    const std::vector<double> g = {0.0, 0.0};
    AdamState s;
    adam_step(p, g, s);
    CHECK(s.step == 1);
    CHECK(p[0] == 0.5f);
    CHECK(p[1] == -1.0f);
  }
  SUBCASE("first step moves by lr") {
    std::vector<float> p = {0.0f, 0.0f, 0.0f};
    const std::vector<double> g = {3.0, -0.01, 100.0};
    AdamState s;
    adam_step(p, g, s);
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-5));
    CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-5));
  }
  SUBCASE("three step scalar trace") {
    std::vector<float> p = {1.0f};
    AdamState s;
    const double expected[] = {0.9900000002, 0.9865382636780189, 0.9827305455251844};
    const double gs[] = {0.5, -0.2, 0.1};
    for (int i = 0; i < 3; ++i) {
      const std::vector<double> g = {gs[i]};
      adam_step(p, g, s);
      CHECK(p[0] == doctest::Approx(expected[i]).epsilon(1e-7));
    }
  }
  SUBCASE("shape mismatch") {
    std::vector<float> p(3);
    const std::vector<double> g(2);
    AdamState s;
    CHECK_THROWS_AS(adam_step(p, g, s), ShapeMismatch);
  }
  SUBCASE("field optimizer steps both grids") {
    auto f = random_field(4, 10);
    const auto before = f;
    FieldGrad g;
    g.density.assign(f.density().size(), 1.0);
    g.color.assign(f.color().size(), -1.0);
    FieldOptimizer opt(0.05);
    opt.step(f, g);
    CHECK(opt.steps() == 1);
    CHECK(f.density()[0] == doctest::Approx(before.density()[0] - 0.05).epsilon(1e-5));
    CHECK(f.color()[5] == doctest::Approx(before.color()[5] + 0.05).epsilon(1e-5));
  }
}

TEST_CASE("field blob round trip") {
  distillab::testing::TempDir dir("field");
  const auto f = random_field(5, 11);
  const auto path = dir.path() / "f.bin";
  save_field(f, path);
  CHECK(load_field(path) == f);

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  std::uint32_t res = 0;
  in.read(reinterpret_cast<char*>(&res), 4);
  CHECK(res == 5);
  CHECK(std::filesystem::file_size(path) == 8 + 2 * 4 + 4 * (125 + 375));

  Blob other;
  other.magic = make_magic("NOTFIELD");
  other.header = {5, 1};
  write_blob(other, dir.path() / "g.bin");
  CHECK_THROWS(load_field(dir.path() / "g.bin"));
  CHECK_THROWS(load_field(dir.path() / "missing.bin"));
}
