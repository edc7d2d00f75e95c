// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits 0
// only when every selected criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distillab/diffusion.hpp"
#include "distillab/distill.hpp"
#include "distillab/field.hpp"
#include "distillab/harness.hpp"
#include "distillab/image.hpp"
#include "distillab/parallel.hpp"
#include "distillab/priors.hpp"
#include "distillab/rng.hpp"
#include "distillab/scene.hpp"

using namespace distillab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Rng test_rng(std::uint64_t stream) { return Rng(0, RngComponent::kTest, stream); }

Image random_image(int w, int h, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Image img(w, h);
  for (double& v : img.values()) v = rng.uniform(lo, hi);
  return img;
}

Image normal_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (double& v : img.values()) v = rng.normal();
  return img;
}

double max_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// 1

Outcome gradient_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  VoxelField f = VoxelField::optimizable(8, 0.5);
  Rng rng = test_rng(101);
  for (float& v : f.density()) v = static_cast<float>(rng.uniform(-1.0, 1.5));
  for (float& v : f.color()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  Camera cam;
  cam.azimuth_deg = 12.0;
  cam.elevation_deg = -6.0;
  cam.width = 4;
  cam.height = 4;
  const RenderConfig rc;
  const Image w = random_image(4, 4, rng, -1.0, 1.0);
  auto objective = [&](const VoxelField& g) {
    const Image img = render_view(g, cam, rc);
    double s = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) s += img.values()[i] * w.values()[i];
    return s;
  };
  const FieldGrad grad = backward(f, cam, rc, w);

  // Parameters the rays actually reach; untouched ones are trivially zero.
  std::vector<std::pair<bool, std::size_t>> live;
  for (std::size_t i = 0; i < grad.density.size(); ++i)
    if (std::abs(grad.density[i]) > 1e-3) live.emplace_back(true, i);
  for (std::size_t i = 0; i < grad.color.size(); ++i)
    if (std::abs(grad.color[i]) > 1e-3) live.emplace_back(false, i);
  if (live.size() < 10) return {false, "only " + std::to_string(live.size()) + " live parameters"};

  const double h = 1e-3;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto [dens, idx] = live[rng.index(live.size())];
    VoxelField plus = f;
    VoxelField minus = f;
    auto p = dens ? plus.density() : plus.color();
    auto m = dens ? minus.density() : minus.color();
    p[idx] += static_cast<float>(h);
    m[idx] -= static_cast<float>(h);
    const double step = static_cast<double>(p[idx]) - static_cast<double>(m[idx]);
    const double fd = (objective(plus) - objective(minus)) / step;
    const double an = dens ? grad.density[idx] : grad.color[idx];
    worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-2));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-3 && secs < 5.0, "max rel err " + num(worst) + " (< 1e-3), " + num(secs, 3) + " s (< 5)"};
}

// ---------------------------------------------------------------------------
// 2

class TrueEps : public DenoiserPrior {
 public:
  TrueEps(const Image& x0, const NoiseSchedule& sched) : x0_(x0), sched_(sched) {}
  Image predict_eps(const Image& z, int t, std::optional<int>) const override {
    return x0_to_eps(z, x0_, t, sched_);
  }

 private:
  Image x0_;
  NoiseSchedule sched_;
};

Outcome scheduler_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  const NoiseSchedule sched = make_schedule();
  Rng rng = test_rng(202);
  double worst_consistency = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Image x0 = random_image(8, 8, rng, -1.0, 1.0);
    const Image eps = normal_image(8, 8, rng);
    const int t = rng.integer(2, 1000);
    const int t_next = rng.integer(0, t - 1);
    const Image z = q_sample(x0, t, eps, sched);
    worst_consistency = std::max(worst_consistency, max_diff(x0_to_eps(z, x0, t, sched), eps));
    worst_consistency = std::max(worst_consistency, max_diff(eps_to_x0(z, eps, t, sched), x0));
    const Image expect = t_next == 0 ? x0 : q_sample(x0, t_next, eps, sched);
    worst_consistency = std::max(worst_consistency, max_diff(ddim_step(z, eps, t, t_next, sched), expect));
  }
  double worst_run = 0.0;
  const Image x0 = random_image(16, 16, rng, -1.0, 1.0);
  const TrueEps prior(x0, sched);
  for (int k : {1, 2, 7, 20, 50, 100, 1000}) {
    const DdimPlan plan = make_plan(1000, k);
    const int t_start = plan.steps.front();
    const Image z = q_sample(x0, t_start, normal_image(16, 16, rng), sched);
    worst_run = std::max(worst_run, max_diff(ddim_run(z, t_start, plan, prior, std::nullopt, 1.0, sched), x0));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_consistency < 1e-6 && worst_run < 1e-5 && secs < 5.0,
          "step consistency " + num(worst_consistency) + " (< 1e-6), ddim_run recovery " + num(worst_run) +
              " (< 1e-5), " + num(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 3

Outcome patch_equivalence() {
  const VoxelField gt = bake_scene(generate_scene(3), 32);
  Rng rng = test_rng(303);
  VoxelField f = VoxelField::optimizable(16, 0.5);
  for (float& v : f.density()) v = static_cast<float>(rng.uniform(-1.0, 2.0));
  for (float& v : f.color()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  const auto cams = camera_grid(GridParams{});
  const RenderConfig rc;
  int identical = 0;
  for (int i = 0; i < 20; ++i) {
    const VoxelField& field = i % 2 == 0 ? gt : f;
    const Camera& cam = cams[rng.index(cams.size())];
    const int size = rng.integer(1, 32);
    const PatchSpec p{rng.integer(0, cam.height - size), rng.integer(0, cam.width - size), size};
    const std::vector<PatchSpec> one{p};
    if (render_patches(field, cam, rc, one).front() == crop(render_view(field, cam, rc), p)) ++identical;
  }
  return {identical == 20, std::to_string(identical) + "/20 patches bit-identical"};
}

// ---------------------------------------------------------------------------
// Desk runs (4 to 8), cached by name.

class DeskRuns {
 public:
  explicit DeskRuns(std::filesystem::path root) : root_(std::move(root)) {}

  const RunReport& get(const std::string& name, Strategy strategy, std::uint64_t seed,
                       const std::function<void(ExperimentConfig&)>& tweak = {}) {
    const std::string key = name + "_seed" + std::to_string(seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.run_id = key;
    cfg.output_dir = root_ / key;
    cfg.distill.strategy = strategy;
    if (tweak) tweak(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    RunReport r = run_experiment(cfg);
    std::cerr << "  run " << key << ": psnr " << num(r.metrics.psnr) << " perceptual " << num(r.metrics.perceptual)
              << " leakage " << num(r.metrics.leakage) << " ("
              << num(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3) << " s)\n";
    return cache_.emplace(key, std::move(r)).first->second;
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::map<std::string, RunReport> cache_;
};

const std::vector<std::uint64_t> kSeeds{0, 1, 2};

Outcome strategy_ordering(DeskRuns& runs) {
  int perceptual_votes = 0;
  int leakage_votes = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& prog = runs.get("progressive", Strategy::kProgressive, seed);
    const auto& s1 = runs.get("stage1_only", Strategy::kStage1Only, seed);
    const auto& s2 = runs.get("stage2_only", Strategy::kStage2Only, seed);
    const double pr = s1.metrics.perceptual / prog.metrics.perceptual;
    const double lr = s2.metrics.leakage / prog.metrics.leakage;
    perceptual_votes += pr >= 1.2;
    leakage_votes += lr >= 1.5;
    detail += " seed" + std::to_string(seed) + ": s1/prog perceptual " + num(pr, 3) + ", s2/prog leakage " +
              num(lr, 3) + ";";
  }
  return {perceptual_votes >= 2 && leakage_votes >= 2,
          "votes perceptual " + std::to_string(perceptual_votes) + "/3 (ratio >= 1.2), leakage " +
              std::to_string(leakage_votes) + "/3 (ratio >= 1.5);" + detail};
}

std::pair<double, double> final_and_min_mse(const RunReport& r) {
  double last = NAN;
  double best = INFINITY;
  for (const auto& h : r.history)
    if (h.phase == "sds") {
      last = h.heldout_mse;
      best = std::min(best, h.heldout_mse);
    }
  return {last, best};
}

Outcome sds_divergence(DeskRuns& runs) {
  int annealed_ok = 0;
  int capped_ok = 0;
  std::string detail;
  for (std::uint64_t seed : {0, 1}) {
    const auto& annealed = runs.get("sds_annealed", Strategy::kSds, seed, [](ExperimentConfig& c) {
      c.distill.sds.anneal_tmax = true;
    });
    const auto& capped = runs.get("sds_capped", Strategy::kSds, seed, [](ExperimentConfig& c) {
      c.distill.sds.t_min_frac = 0.02;
      c.distill.sds.t_max_frac = 0.5;
      c.distill.sds.anneal_tmax = false;
    });
    const auto [a_last, a_min] = final_and_min_mse(annealed);
    const auto [c_last, c_min] = final_and_min_mse(capped);
    annealed_ok += a_last >= 2.0 * a_min;
    capped_ok += c_last <= 1.2 * c_min;
    detail += " seed" + std::to_string(seed) + ": annealed final/min " + num(a_last / a_min, 3) + ", capped " +
              num(c_last / c_min, 3) + ";";
  }
  return {annealed_ok == 2 && capped_ok == 2,
          "annealed >= 2x " + std::to_string(annealed_ok) + "/2, capped <= 1.2x " + std::to_string(capped_ok) + "/2;" +
              detail};
}

Outcome ratio_sweep(DeskRuns& runs) {
  // Progressive with the fraction pinned; 1.0 and 0.0 coincide with the
  // single-stage strategies.
  std::vector<double> perceptual;
  std::vector<double> leakage;
  std::string detail;
  for (double fraction : {1.0, 0.6, 0.0}) {
    double p = 0.0;
    double l = 0.0;
    for (auto seed : kSeeds) {
      const RunReport* r = nullptr;
      if (fraction == 1.0)
        r = &runs.get("stage1_only", Strategy::kStage1Only, seed);
      else if (fraction == 0.0)
        r = &runs.get("stage2_only", Strategy::kStage2Only, seed);
      else
        r = &runs.get("progressive", Strategy::kProgressive, seed);
      p += r->metrics.perceptual / static_cast<double>(kSeeds.size());
      l += r->metrics.leakage / static_cast<double>(kSeeds.size());
    }
    perceptual.push_back(p);
    leakage.push_back(l);
    detail += " " + num(fraction, 2) + ": perceptual " + num(p) + " leakage " + num(l) + ";";
  }
  const bool p_ok = perceptual[1] <= perceptual[0] && perceptual[2] <= perceptual[1];
  const bool l_ok = leakage[1] >= leakage[0] && leakage[2] >= leakage[1];
  return {p_ok && l_ok, std::string("perceptual non-increasing ") + (p_ok ? "yes" : "no") +
                            ", leakage non-decreasing " + (l_ok ? "yes" : "no") + "; 3-seed means" + detail};
}

Outcome stage1_blur(DeskRuns& runs) {
  std::string detail;
  bool ok = true;
  for (auto seed : kSeeds) {
    const auto& r = runs.get("stage1_only", Strategy::kStage1Only, seed);
    double target_hf = NAN;
    for (const auto& h : r.history)
      if (h.phase == "stage1") target_hf = h.target_hf;
    const double ratio = target_hf / r.gt_hf;
    ok = ok && ratio <= 0.7;
    detail += " seed" + std::to_string(seed) + ": target hf " + num(target_hf) + " / gt hf " + num(r.gt_hf) + " = " +
              num(ratio, 3) + ";";
  }
  return {ok, "final-refresh target hf <= 0.7 x gt;" + detail};
}

Outcome determinism(DeskRuns& runs) {
  std::string a;
  std::string b;
  for (int threads : {1, 8}) {
    ThreadScope scope(threads);
    ExperimentConfig cfg;
    cfg.run_id = "determinism";
    cfg.output_dir = runs.root() / ("determinism_t" + std::to_string(threads));
    run_experiment(cfg);
    (threads == 1 ? a : b) = slurp(cfg.output_dir / "metrics.csv");
  }
  return {!a.empty() && a == b, a == b ? "metrics.csv byte-identical at 1 and 8 threads" : "metrics.csv differs"};
}

// ---------------------------------------------------------------------------
// 9

Outcome toy_training() {
  const NoiseSchedule sched = make_schedule();
  const VoxelField gt = bake_scene(generate_scene(0), 48);
  auto cams = camera_grid(GridParams{});
  cams.resize(16);
  for (auto& c : cams) c = c.with_resolution(32, 32);
  const auto imgs = render_gt(gt, cams, RenderConfig{});
  std::vector<std::pair<int, Image>> data;
  for (int v = 0; v < 16; ++v) data.emplace_back(v, imgs[static_cast<std::size_t>(v)]);
  ToyDenoiser toy(ToyConfig{16, 0, sched.train_steps()});
  const auto res = toy_train(toy, data, sched, 2000);
  const double ratio = res.smoothed.back() / res.smoothed.front();

  const int t = sched.timestep_for_fraction(0.2);
  Rng rng = test_rng(909);
  double gain = 0.0;
  for (int v = 0; v < 16; ++v) {
    const Image& x = imgs[static_cast<std::size_t>(v)];
    const Image z = q_sample(x, t, normal_image(32, 32, rng), sched);
    Image raw = z;
    for (double& p : raw.values()) p /= std::sqrt(sched.alpha_bar(t));
    const Image x0 = eps_to_x0(z, toy.predict_eps(z, t, v), t, sched);
    gain += (psnr(x0, x) - psnr(raw, x)) / 16.0;
  }
  return {ratio < 0.5 && gain >= 3.0, "smoothed loss ratio " + num(ratio) + " (< 0.5), denoising gain at t=" +
                                          std::to_string(t) + " " + num(gain, 3) + " dB (>= 3)"};
}

// ---------------------------------------------------------------------------
// 10

double naive_ssim(const Image& a, const Image& b) {
  double g[11];
  double gs = 0.0;
  for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-0.5 * (i - 5) * (i - 5) / (1.5 * 1.5));
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    int count = 0;
    for (int y = 0; y + 11 <= a.height(); ++y)
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double ma = 0, mb = 0;
        for (int j = 0; j < 11; ++j)
          for (int i = 0; i < 11; ++i) {
            const double wt = g[i] * g[j] / (gs * gs);
            ma += wt * std::clamp(a.at(x + i, y + j, c), 0.0, 1.0);
            mb += wt * std::clamp(b.at(x + i, y + j, c), 0.0, 1.0);
          }
        double va = 0, vb = 0, cov = 0;
        for (int j = 0; j < 11; ++j)
          for (int i = 0; i < 11; ++i) {
            const double wt = g[i] * g[j] / (gs * gs);
            const double da = std::clamp(a.at(x + i, y + j, c), 0.0, 1.0) - ma;
            const double db = std::clamp(b.at(x + i, y + j, c), 0.0, 1.0) - mb;
            va += wt * da * da;
            vb += wt * db * db;
            cov += wt * da * db;
          }
        const double c1 = 1e-4;
        const double c2 = 9e-4;
        acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    total += acc / count;
  }
  return total / 3.0;
}

Outcome metric_sanity() {
  Rng rng = test_rng(1010);
  double ssim_err = 0.0;
  double mse_err = 0.0;
  double psnr_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    const int w = rng.integer(11, 40);
    const int h = rng.integer(11, 40);
    const Image a = gaussian_blur(random_image(w, h, rng), 1.0 + i);
    Image b = a;
    for (double& v : b.values()) v += 0.1 * rng.normal();
    ssim_err = std::max(ssim_err, std::abs(ssim(a, b) - naive_ssim(a, b)));
    long double acc = 0.0L;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const long double d = static_cast<long double>(a.values()[k]) - b.values()[k];
      acc += d * d;
    }
    const double ref_mse = static_cast<double>(acc / a.size());
    const double ref_psnr = 10.0 * std::log10(1.0 / ref_mse);
    mse_err = std::max(mse_err, std::abs(mse(a, b) - ref_mse) / ref_mse);
    psnr_err = std::max(psnr_err, std::abs(psnr(a, b) - ref_psnr));
  }
  return {ssim_err < 1e-6 && mse_err < 1e-12 && psnr_err < 1e-10,
          "ssim vs naive " + num(ssim_err) + " (< 1e-6), mse rel " + num(mse_err) + ", psnr " + num(psnr_err)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks", "distillab_acceptance"};
  std::string only;
  std::string out = (std::filesystem::temp_directory_path() / "distillab_acceptance").string();
  int threads = 0;
  app.add_option("--only", only, "Comma-separated criteria to run (default: all)");
  app.add_option("--out", out, "Directory for experiment runs");
  app.add_option("--threads", threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_thread_count(threads);

  std::set<int> selected;
  {
    std::stringstream ss(only);
    for (std::string s; std::getline(ss, s, ',');)
      if (!s.empty()) selected.insert(std::stoi(s));
  }
  auto wanted = [&](int c) { return selected.empty() || selected.count(c) > 0; };

  DeskRuns runs(out);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"renderer gradient exactness", gradient_exactness},
      {"scheduler algebra", scheduler_algebra},
      {"patch/full-render equivalence", patch_equivalence},
      {"strategy ordering", [&] { return strategy_ordering(runs); }},
      {"divergence without capped tmax", [&] { return sds_divergence(runs); }},
      {"ratio sweep shape", [&] { return ratio_sweep(runs); }},
      {"stage-1 blur feedback", [&] { return stage1_blur(runs); }},
      {"determinism across thread counts", [&] { return determinism(runs); }},
      {"toy prior training", toy_training},
      {"metric sanity", metric_sanity},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail << " ["
              << num(secs, 3) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
