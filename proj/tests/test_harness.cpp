// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "distillab/harness.hpp"
#include "distillab/parallel.hpp"
#include "test_util.hpp"

using namespace distillab;
using distillab::testing::TempDir;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// 8^3 field, 2x2 views at 16 px, K=5, N=2.
ExperimentConfig minimal(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.output_dir = out;
  c.gt_resolution = 16;
  c.field_resolution = 8;
  c.grid.n_az = 2;
  c.grid.n_el = 2;
  c.grid.width = 16;
  c.grid.height = 16;
  c.holdout_count = 2;
  c.render.samples_per_ray = 16;
  c.distill.ddim_steps = 5;
  c.distill.iterations_per_refresh = 2;
  c.distill.resolution_ladder = {16};
  c.distill.patch_count = 2;
  c.distill.patch_size = 16;
  c.distill.stage2_budget = 6;
  c.distill.perceptual_weight = 0.0;
  return c;
}

// Runs the CLI with captured stderr/stdout.
int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "distillab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream cap_out;
  std::ostringstream cap_err;
  auto* old_out = std::cout.rdbuf(cap_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(cap_err.rdbuf());
  const int code = cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (out) *out = cap_out.str() + cap_err.str();
  return code;
}

}  // namespace

TEST_CASE("config round trip and strictness") {
  ExperimentConfig c = minimal("runs/x");
  c.scene_seed = 7;
  c.distill.stage2_cfg_scale = 7.5;
  c.distill.resolution_ladder = {16, 32};
  const json doc = to_json(c);
  const ExperimentConfig back = config_from_json(doc);
  CHECK(to_json(back) == doc);
  CHECK(back.effective_scene_seed() == 7);
  CHECK(back.distill.stage2_cfg_scale.value() == 7.5);

  json bad = doc;
  bad["distill"]["cfg"] = 3.0;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doc;
  bad["typo"] = 1;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doc;
  bad["distill"]["K"] = "many";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doc;
  bad["distill"]["strategy"] = "magic";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);

  // Missing keys keep defaults.
  const ExperimentConfig partial = config_from_json(json{{"seed", 3}});
  CHECK(partial.seed == 3);
  CHECK(partial.distill.ddim_steps == 20);
  CHECK(partial.field_resolution == 48);
}

TEST_CASE("validation") {
  ExperimentConfig c = minimal("runs/x");
  CHECK_NOTHROW(c.validate());
  auto expect_bad = [&](auto mutate) {
    ExperimentConfig b = c;
    mutate(b);
    CHECK_THROWS_AS(b.validate(), ConfigError);
  };
  expect_bad([](ExperimentConfig& b) { b.grid.n_az = 0; });
  expect_bad([](ExperimentConfig& b) { b.holdout_count = 0; });
  expect_bad([](ExperimentConfig& b) { b.distill.ddim_steps = 0; });
  expect_bad([](ExperimentConfig& b) { b.distill.ddim_steps = 2000; });
  expect_bad([](ExperimentConfig& b) { b.prior = "sd"; });
  expect_bad([](ExperimentConfig& b) { b.prior = "toy"; });
  expect_bad([](ExperimentConfig& b) { b.scene_path = "/nonexistent/scene.json"; });
  expect_bad([](ExperimentConfig& b) { b.schedule.beta_max = 2.0; });
}

TEST_CASE("dotted overrides") {
  json doc = to_json(ExperimentConfig{});
  doc["distill"]["cfg_scale"] = 5.0;
  apply_override(doc, "distill.cfg_scale=19.0");
  CHECK(config_from_json(doc).distill.cfg_scale == 19.0);
  apply_override(doc, "distill.strategy=stage2_only");
  CHECK(config_from_json(doc).distill.strategy == Strategy::kStage2Only);
  apply_override(doc, "distill.resolution_ladder=[16,32]");
  CHECK(config_from_json(doc).distill.resolution_ladder == std::vector<int>{16, 32});
  apply_override(doc, "distill.sds.anneal_tmax=true");
  CHECK(config_from_json(doc).distill.sds.anneal_tmax);
  CHECK_THROWS_AS(apply_override(doc, "distill.cfg=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "distill.cfg_scale"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "seed.x=1"), ConfigError);
}

TEST_CASE("cli exit codes") {
  std::string text;
  CHECK(run_cli({}, &text) == 2);
  CHECK(text.find("Usage") != std::string::npos);
  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"distill", "--bogus"}) == 2);
  CHECK(run_cli({"--version"}, &text) == 0);
  CHECK(text.find("distillab") != std::string::npos);
  CHECK(run_cli({"distill", "--config", "/nonexistent/c.json"}) == 2);
  CHECK(run_cli({"distill", "--set", "scene.path=/nonexistent/scene.json"}) == 2);
  CHECK(run_cli({"distill", "--set", "distill.nope=1"}) == 2);
  CHECK(run_cli({"distill", "--threads", "0"}) == 2);
  CHECK(run_cli({"sweep", "--axis", "colour"}) == 2);
}

TEST_CASE("minimal run emits all files") {
  TempDir tmp("harness_min");
  ExperimentConfig c = minimal(tmp.path() / "a");
  c.dump_images = true;
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport r = run_experiment(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 10.0);
  for (const char* f : {"metrics.csv", "history.csv", "timing.csv", "config.json", "field.bin", "heldout_00.ppm",
                        "heldout_01.ppm", "heldout_gt_00.ppm"})
    CHECK_MESSAGE(std::filesystem::exists(c.output_dir / f), f);
  CHECK(std::filesystem::is_directory(c.output_dir / "targets"));
  CHECK(count_lines(c.output_dir / "metrics.csv") == 2);
  CHECK(slurp(c.output_dir / "metrics.csv").rfind(kMetricsHeader, 0) == 0);
  CHECK(slurp(c.output_dir / "history.csv").rfind(kHistoryHeader, 0) == 0);
  CHECK(count_lines(c.output_dir / "history.csv") == 1 + static_cast<int>(r.history.size()));
  CHECK(std::isfinite(r.metrics.psnr));
  CHECK(r.metrics.ssim <= 1.0);

  // The echoed config alone reproduces the run.
  ExperimentConfig echo = load_config(c.output_dir / "config.json");
  echo.output_dir = tmp.path() / "b";
  run_experiment(echo);
  CHECK(slurp(tmp.path() / "b" / "metrics.csv") == slurp(c.output_dir / "metrics.csv"));
  CHECK(slurp(tmp.path() / "b" / "history.csv") == slurp(c.output_dir / "history.csv"));
  CHECK(slurp(tmp.path() / "b" / "field.bin") == slurp(c.output_dir / "field.bin"));
}

TEST_CASE("thread count does not change metrics") {
  TempDir tmp("harness_threads");
  ExperimentConfig c = minimal(tmp.path() / "t1");
  {
    ThreadScope s(1);
    run_experiment(c);
  }
  c.output_dir = tmp.path() / "t4";
  {
    ThreadScope s(4);
    run_experiment(c);
  }
  CHECK(slurp(tmp.path() / "t1" / "metrics.csv") == slurp(tmp.path() / "t4" / "metrics.csv"));
  CHECK(slurp(tmp.path() / "t1" / "field.bin") == slurp(tmp.path() / "t4" / "field.bin"));
}

TEST_CASE("unwritable output fails") {
  ExperimentConfig c = minimal("/proc/distillab_cannot_write");
  CHECK_THROWS(run_experiment(c));
}

TEST_CASE("cli distill and eval") {
  TempDir tmp("harness_cli");
  const auto cfg_path = tmp.path() / "c.json";
  ExperimentConfig c = minimal(tmp.path() / "from_file");
  c.distill.cfg_scale = 5.0;
  {
    std::ofstream(cfg_path) << to_json(c).dump(2);
  }
  std::string text;
  const auto out = tmp.path() / "run";
  REQUIRE(run_cli({"distill", "--config", cfg_path.string(), "--set", "distill.cfg_scale=19.0", "--seed", "3",
                   "--out", out.string()},
                  &text) == 0);
  const ExperimentConfig echo = load_config(out / "config.json");
  CHECK(echo.distill.cfg_scale == 19.0);
  CHECK(echo.seed == 3);
  CHECK(text.find(kMetricsHeader) != std::string::npos);

  REQUIRE(run_cli({"eval", "--config", (out / "config.json").string(), "--field", (out / "field.bin").string()},
                  &text) == 0);
  // Evaluating the saved field reproduces the psnr reported by the run.
  const std::string metrics = slurp(out / "metrics.csv");
  const auto row = metrics.substr(metrics.find('\n') + 1);
  std::vector<std::string> cols;
  std::stringstream ss(row);
  for (std::string s; std::getline(ss, s, ',');) cols.push_back(s);
  REQUIRE(cols.size() >= 6);
  CHECK(text.find(cols[5]) != std::string::npos);

  CHECK(run_cli({"eval", "--config", (out / "config.json").string(), "--field", "/nonexistent.bin"}) == 2);

  const auto scene = tmp.path() / "scene.json";
  CHECK(run_cli({"gen-scene", "--seed", "4", "--out", scene.string()}) == 0);
  CHECK(run_cli({"render", "--config", cfg_path.string(), "--scene", scene.string(), "--out",
                 (tmp.path() / "views").string()}) == 0);
  CHECK(std::filesystem::exists(tmp.path() / "views" / "view_03.ppm"));
  CHECK(run_cli({"render", "--config", cfg_path.string(), "--field", (out / "field.bin").string(), "--out",
                 (tmp.path() / "fviews").string()}) == 0);
  CHECK(std::filesystem::exists(tmp.path() / "fviews" / "view_00.ppm"));
}

TEST_CASE("toy prior through the cli") {
  TempDir tmp("harness_toy");
  const auto cfg_path = tmp.path() / "c.json";
  ExperimentConfig c = minimal(tmp.path() / "run");
  {
    std::ofstream(cfg_path) << to_json(c).dump(2);
  }
  const auto weights = tmp.path() / "toy.bin";
  REQUIRE(run_cli({"train-prior", "--config", cfg_path.string(), "--steps", "20", "--resolution", "16", "--out",
                   weights.string()}) == 0);
  CHECK(run_cli({"distill", "--config", cfg_path.string(), "--set", "prior.kind=toy", "--set",
                 "prior.weights=" + weights.string()}) == 0);
  CHECK(std::filesystem::exists(c.output_dir / "metrics.csv"));
  // A prior trained on a different view count is rejected as a config error.
  CHECK(run_cli({"distill", "--config", cfg_path.string(), "--set", "prior.kind=toy", "--set",
                 "prior.weights=" + weights.string(), "--set", "grid.n_az=3"}) == 2);
}

TEST_CASE("sweeps") {
  CHECK(default_sweep_values("cfg_scale") == std::vector<json>{5.0, 10.0, 19.0, 30.0});
  CHECK(default_sweep_values("stage1_fraction") == std::vector<json>{1.0, 0.8, 0.6, 0.3, 0.0});
  CHECK_THROWS_AS(default_sweep_values("lr"), ConfigError);

  TempDir tmp("harness_sweep");
  SweepSpec bad;
  bad.values.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.values = {1.0};
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  SUBCASE("default ratio sweep has five rows per seed") {
    SweepSpec s;
    s.base = minimal(tmp.path() / "ratio");
    s.base.distill.ddim_steps = 2;
    s.base.distill.iterations_per_refresh = 1;
    s.base.distill.stage2_budget = 2;
    s.axis = "stage1_fraction";
    s.values = default_sweep_values(s.axis);
    s.seeds = {0, 1};
    const auto rows = run_sweep(s, 2);
    CHECK(rows.size() == 10);
    for (const auto& r : rows) CHECK(r.ok);
    CHECK(count_lines(s.base.output_dir / "runs.csv") == 11);
    CHECK(count_lines(s.base.output_dir / "sweep.csv") == 6);
  }

  SUBCASE("one by one sweep equals a single run") {
    SweepSpec s;
    s.base = minimal(tmp.path() / "single");
    s.axis = "cfg_scale";
    s.values = {19.0};
    s.seeds = {5};
    const auto rows = run_sweep(s, 1);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].ok);
    ExperimentConfig direct = minimal(tmp.path() / "direct");
    direct.seed = 5;
    direct.distill.cfg_scale = 19.0;
    direct.run_id = rows[0].report.run_id;
    run_experiment(direct);
    CHECK(slurp(tmp.path() / "direct" / "metrics.csv") ==
          slurp(tmp.path() / "single" / "cfg_scale_19" / "seed_5" / "metrics.csv"));
  }

  SUBCASE("aggregated sweep regression") {
    SweepSpec s;
    s.base = minimal(tmp.path() / "frozen");
    s.axis = "cfg_scale";
    s.values = {5.0, 19.0};
    s.seeds = {0, 1};
    run_sweep(s, 2);
    std::ifstream in(s.base.output_dir / "sweep.csv");
    std::string line;
    std::getline(in, line);
    // psnr mean/std, mse mean, leakage mean per value.
    const double frozen[2][4] = {{12.535225, 0.1033459572, 0.05580363162, 0.01033197986},
                                 {12.53547626, 0.103429822, 0.0558004427, 0.01042303817}};
    for (const auto& f : frozen) {
      REQUIRE(std::getline(in, line));
      std::vector<double> cols;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cols.push_back(std::atof(c.c_str()));
      REQUIRE(cols.size() == 14);
      CHECK(cols[2] == 2);
      CHECK(cols[3] == 0);
      CHECK(cols[4] == doctest::Approx(f[0]).epsilon(1e-6));
      CHECK(cols[5] == doctest::Approx(f[1]).epsilon(1e-4));
      CHECK(cols[8] == doctest::Approx(f[2]).epsilon(1e-6));
      CHECK(cols[12] == doctest::Approx(f[3]).epsilon(1e-5));
    }
  }

  SUBCASE("failures are kept as marked rows") {
    SweepSpec s;
    s.base = minimal(tmp.path() / "fail");
    s.axis = "strategy";
    s.values = {"progressive", "stage1_only"};
    s.seeds = {0};
    std::filesystem::create_directories(s.base.output_dir);
    std::ofstream(s.base.output_dir / "strategy_stage1_only") << "in the way";
    const auto rows = run_sweep(s, 1);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ok);
    CHECK_FALSE(rows[1].ok);
    CHECK(count_lines(s.base.output_dir / "runs.csv") == 3);
    const std::string runs = slurp(s.base.output_dir / "runs.csv");
    CHECK(runs.find(",failed,") != std::string::npos);
    const std::string agg = slurp(s.base.output_dir / "sweep.csv");
    CHECK(agg.find("strategy,stage1_only,0,1") != std::string::npos);
  }
}
