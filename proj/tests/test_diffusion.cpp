// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "distillab/diffusion.hpp"
#include "test_util.hpp"

using namespace distillab;
using distillab::testing::lcg_image;
using distillab::testing::max_abs_diff;
using distillab::testing::noise_image;

namespace {

Image gaussian_image(int w, int h, std::uint64_t stream) {
  Image img(w, h);
  Rng rng(0, RngComponent::kTest, stream);
  for (double& v : img.values()) v = rng.normal();
  return img;
}

// Always answers with the same noise image.
class ConstantPrior : public DenoiserPrior {
 public:
  explicit ConstantPrior(Image eps) : eps_(std::move(eps)) {}
  Image predict_eps(const Image&, int, std::optional<int>) const override { return eps_; }

 private:
  Image eps_;
};

// Knows the clean image, so it recovers the exact forward noise of any z.
class KnownCleanPrior : public DenoiserPrior {
 public:
  KnownCleanPrior(Image x0, const NoiseSchedule& sched) : x0_(std::move(x0)), sched_(sched) {}
  Image predict_eps(const Image& z, int t, std::optional<int>) const override { return x0_to_eps(z, x0_, t, sched_); }

 private:
  Image x0_;
  const NoiseSchedule& sched_;
};

// Conditional and unconditional answers differ so guidance is observable.
class SplitPrior : public DenoiserPrior {
 public:
  Image predict_eps(const Image& z, int t, std::optional<int> view) const override {
    Image out = z;
    for (double& v : out.values()) v = view ? 0.1 * v + 0.001 * t : -0.05 * v;
    return out;
  }
};

}  // namespace

TEST_CASE("noise schedule") {
  const auto s = make_schedule();
  CHECK(s.train_steps() == 1000);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-14));
  CHECK(s.alpha_bar(500) == doctest::Approx(0.07858724288177824).epsilon(1e-12));
  CHECK(s.alpha_bar(1000) == doctest::Approx(4.035829765375676e-05).epsilon(1e-10));
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(2e-2));
  for (int t = 1; t <= 1000; ++t) {
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(s.beta(t) > 0.0);
    if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
  }
  CHECK(s.timestep_for_fraction(0.02) == 20);
  CHECK(s.timestep_for_fraction(0.5) == 500);
  CHECK(s.noise_to_signal(500) == doctest::Approx(std::sqrt((1 - 0.07858724288177824) / 0.07858724288177824)));
  CHECK_THROWS(make_schedule(1000, 0.0, 0.02));
  CHECK_THROWS(make_schedule(1000, 0.03, 0.02));
  CHECK_THROWS(make_schedule(1000, 1e-4, 1.0));
}

TEST_CASE("ddim plan") {
  const auto p = make_plan(1000, 100);
  REQUIRE(p.steps.size() == 101);
  CHECK(p.step_count() == 100);
  CHECK(p.steps.front() == 1000);
  CHECK(p.steps.back() == 0);
  CHECK(p.steps[60] == 400);
  for (std::size_t i = 1; i < p.steps.size(); ++i) CHECK(p.steps[i] < p.steps[i - 1]);
  CHECK(p.position(400) == std::optional<std::size_t>(60));
  CHECK_FALSE(p.position(405).has_value());

  const auto odd = make_plan(1000, 7);
  CHECK(odd.steps[1] == 857);
  CHECK(odd.steps[6] == 143);
  CHECK_THROWS(make_plan(1000, 0));
  CHECK_THROWS(make_plan(10, 11));
}

TEST_CASE("q_sample") {
  const auto s = make_schedule();
  const Image x0 = lcg_image(4, 3, 5);
  const Image eps = gaussian_image(4, 3, 1);
  CHECK(q_sample(x0, 0, eps, s) == x0);
  const Image z = q_sample(x0, 300, Image(4, 3), s);
  CHECK(z.at(1, 1, 1) == doctest::Approx(std::sqrt(s.alpha_bar(300)) * x0.at(1, 1, 1)));

  // t = 259 is the step where alpha_bar is closest to one half
  CHECK(s.alpha_bar(259) == doctest::Approx(0.5002447287382928).epsilon(1e-12));
  const Image half = q_sample(Image(3, 3), 259, Image(3, 3, 1.0), s);
  for (double v : half.values()) CHECK(v == doctest::Approx(std::sqrt(0.5)).epsilon(3e-4));
  CHECK_THROWS_AS(q_sample(x0, 10, Image(3, 4), s), ShapeMismatch);
  CHECK_THROWS(q_sample(x0, 1001, eps, s));
}

TEST_CASE("eps and x0 conversions") {
  const auto s = make_schedule();
  const Image z = lcg_image(4, 4, 1);
  const Image eps = lcg_image(4, 4, 2);
  const Image x0 = eps_to_x0(z, eps, 500, s);
  CHECK(x0.at(2, 1, 0) == doctest::Approx(2.496755764900516).epsilon(1e-12));
  CHECK(x0.at(0, 3, 2) == doctest::Approx(-0.03167773182496906).epsilon(1e-10));
  CHECK(max_abs_diff(x0_to_eps(z, x0, 500, s), eps) < 1e-6);

  for (int t : {1, 50, 999, 1000}) {
    const Image clean = noise_image(5, 5, 3);
    const Image noise = gaussian_image(5, 5, 4);
    const Image zt = q_sample(clean, t, noise, s);
    CHECK(max_abs_diff(eps_to_x0(zt, noise, t, s), clean) < 1e-9);
    CHECK(max_abs_diff(x0_to_eps(zt, eps_to_x0(zt, noise, t, s), t, s), noise) < 1e-6);
  }
  CHECK_THROWS(eps_to_x0(z, eps, 0, s));
  CHECK_THROWS(x0_to_eps(z, eps, 0, s));
}

TEST_CASE("cfg_combine") {
  const Image u = gaussian_image(3, 3, 5);
  const Image c = gaussian_image(3, 3, 6);
  CHECK(max_abs_diff(cfg_combine(u, c, 1.0), c) < 1e-15);
  CHECK(cfg_combine(u, c, 0.0) == u);
  CHECK(max_abs_diff(cfg_combine(c, c, 19.0), c) == 0.0);
  const Image g = cfg_combine(u, c, 19.0);
  CHECK(g.at(1, 2, 0) == doctest::Approx(u.at(1, 2, 0) + 19.0 * (c.at(1, 2, 0) - u.at(1, 2, 0))));
  CHECK_THROWS_AS(cfg_combine(u, Image(2, 3), 2.0), ShapeMismatch);
}

TEST_CASE("ddim_step") {
  const auto s = make_schedule();
  const Image clean = noise_image(6, 6, 7);
  const Image noise = gaussian_image(6, 6, 8);

  SUBCASE("to zero returns the clean estimate") {
    const Image z = q_sample(clean, 600, noise, s);
    const Image eps = gaussian_image(6, 6, 9);
    CHECK(ddim_step(z, eps, 600, 0, s) == eps_to_x0(z, eps, 600, s));
  }
  SUBCASE("true noise reproduces the forward process") {
    for (auto [t, tn] : {std::pair{900, 450}, std::pair{400, 390}, std::pair{1000, 1}}) {
      const Image z = q_sample(clean, t, noise, s);
      const Image eps = x0_to_eps(z, clean, t, s);
      CHECK(max_abs_diff(ddim_step(z, eps, t, tn, s), q_sample(clean, tn, noise, s)) < 1e-9);
    }
  }
  SUBCASE("constant noise is step count invariant") {
    const Image z = q_sample(clean, 800, noise, s);
    const Image eps = gaussian_image(6, 6, 10);
    const Image one = ddim_step(z, eps, 800, 200, s);
    const Image two = ddim_step(ddim_step(z, eps, 800, 530, s), eps, 530, 200, s);
    CHECK(max_abs_diff(one, two) < 1e-12);
  }
  SUBCASE("timesteps must descend") {
    CHECK_THROWS(ddim_step(clean, noise, 300, 300, s));
    CHECK_THROWS(ddim_step(clean, noise, 300, 400, s));
  }
}

TEST_CASE("ddim_run") {
  const auto s = make_schedule();
  const auto plan = make_plan(1000, 20);
  const Image clean = noise_image(5, 4, 11);
  const Image noise = gaussian_image(5, 4, 12);

  SUBCASE("known clean image is recovered on any ladder") {
    const KnownCleanPrior prior(clean, s);
    for (int k : {1, 3, 20, 100}) {
      const auto p = make_plan(1000, k);
      const Image z = q_sample(clean, 1000, noise, s);
      CHECK(max_abs_diff(ddim_run(z, 1000, p, prior, 0, 1.0, s), clean) < 1e-5);
    }
  }
  SUBCASE("constant noise matches a single jump") {
    const Image eps = gaussian_image(5, 4, 13);
    const ConstantPrior prior(eps);
    const Image z = q_sample(clean, 600, noise, s);
    CHECK(max_abs_diff(ddim_run(z, 600, plan, prior, 0, 19.0, s), eps_to_x0(z, eps, 600, s)) < 1e-9);
  }
  SUBCASE("smallest step is one update") {
    const SplitPrior prior;
    const Image z = q_sample(clean, 50, noise, s);
    const Image expect = eps_to_x0(z, guided_eps(prior, z, 50, 0, 3.0), 50, s);
    CHECK(max_abs_diff(ddim_run(z, 50, plan, prior, 0, 3.0, s), expect) < 1e-12);
  }
  SUBCASE("guidance scale one equals the conditional model") {
    const SplitPrior prior;
    const Image z = q_sample(clean, 700, noise, s);
    Image manual = z;
    for (std::size_t i = *plan.position(700); i + 1 < plan.steps.size(); ++i)
      manual = ddim_step(manual, prior.predict_eps(manual, plan.steps[i], 0), plan.steps[i], plan.steps[i + 1], s);
    CHECK(max_abs_diff(ddim_run(z, 700, plan, prior, 0, 1.0, s), manual) < 1e-12);
    CHECK(max_abs_diff(guided_eps(prior, z, 700, 0, 0.0), prior.predict_eps(z, 700, std::nullopt)) < 1e-15);
  }
  SUBCASE("start must be on the ladder") {
    const SplitPrior prior;
    CHECK_THROWS(ddim_run(clean, 710, plan, prior, 0, 1.0, s));
  }
}
