// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "distillab/blob.hpp"
#include "distillab/parallel.hpp"

namespace distillab {

namespace {

using nlohmann::json;

// Tracks which keys of an object were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + label() + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: '" + where(key) + "': " + e.what());
    }
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  Reader child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? Reader(empty(), where(key)) : Reader(*it, where(key));
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.contains(item.key())) throw ConfigError("config: unknown key '" + where(item.key()) + "'");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <class F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::string indexed(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%02zu%s", prefix, i, ext);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (grid.n_az < 1 || grid.n_el < 1) throw ConfigError("grid counts must be at least 1");
  if (grid.width < 16 || grid.height < 16) throw ConfigError("grid image size must be at least 16 pixels");
  if (holdout_count < 1) throw ConfigError("holdout.count must be at least 1");
  if (field_resolution < 2) throw ConfigError("field.resolution must be at least 2");
  if (gt_resolution < 8) throw ConfigError("scene.gt_resolution must be at least 8");
  as_config_error([&] { return NoiseSchedule(schedule.train_steps, schedule.beta_min, schedule.beta_max); });
  as_config_error([&] {
    render.validate();
    distill.validate();
    Camera probe;
    probe.radius = grid.radius;
    probe.fov_y_deg = grid.fov_y_deg;
    probe.validate();
    return 0;
  });
  if (distill.ddim_steps > schedule.train_steps) throw ConfigError("distill.K exceeds schedule.train_steps");
  if (oracle.amplitude < 0.0) throw ConfigError("prior.oracle.amplitude must be non-negative");
  if (oracle.r_max_px < 0.0) throw ConfigError("prior.oracle.r_max_px must be non-negative");
  if (oracle.reference_width < 1) throw ConfigError("prior.oracle.reference_width must be positive");
  if (prior != "oracle" && prior != "toy") throw ConfigError("prior.kind must be 'oracle' or 'toy'");
  if (prior == "toy") {
    if (prior_weights.empty()) throw ConfigError("prior.weights is required for the toy prior");
    if (!std::ifstream(prior_weights)) throw ConfigError("cannot read prior weights " + prior_weights.string());
    for (int r : distill.resolution_ladder)
      if (r % 4 != 0) throw ConfigError("toy prior needs ladder rungs divisible by 4");
  }
  if (!scene_path.empty() && !std::ifstream(scene_path))
    throw ConfigError("cannot read scene file " + scene_path.string());
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  const auto& d = cfg.distill;
  json grid;
  to_json(grid, cfg.grid);
  return {
      {"seed", cfg.seed},
      {"run_id", cfg.run_id},
      {"output_dir", cfg.output_dir.string()},
      {"dump_images", cfg.dump_images},
      {"scene",
       {{"path", cfg.scene_path.string()},
        {"seed", cfg.scene_seed ? json(*cfg.scene_seed) : json(nullptr)},
        {"gt_resolution", cfg.gt_resolution}}},
      {"grid", grid},
      {"holdout", {{"count", cfg.holdout_count}}},
      {"field", {{"resolution", cfg.field_resolution}}},
      {"schedule",
       {{"train_steps", cfg.schedule.train_steps},
        {"beta_min", cfg.schedule.beta_min},
        {"beta_max", cfg.schedule.beta_max}}},
      {"render",
       {{"samples_per_ray", cfg.render.samples_per_ray},
        {"near", cfg.render.near},
        {"far", cfg.render.far},
        {"background", cfg.render.background},
        {"termination", cfg.render.termination}}},
      {"prior",
       {{"kind", cfg.prior},
        {"weights", cfg.prior_weights.string()},
        {"oracle",
         {{"amplitude", cfg.oracle.amplitude},
          {"smoothness_px", cfg.oracle.smoothness_px},
          {"r_max_px", cfg.oracle.r_max_px},
          {"conditioning", cfg.oracle.conditioning},
          {"reference_width", cfg.oracle.reference_width}}}}},
      {"distill",
       {{"strategy", to_string(d.strategy)},
        {"K", d.ddim_steps},
        {"stage1_fraction", d.stage1_fraction},
        {"N", d.iterations_per_refresh},
        {"cfg_scale", d.cfg_scale},
        {"stage2_cfg_scale", optional_json(d.stage2_cfg_scale)},
        {"stage2_budget", d.stage2_budget},
        {"plateau_window", d.plateau_window},
        {"plateau_tolerance", d.plateau_tolerance},
        {"patch_count", d.patch_count},
        {"patch_size", d.patch_size},
        {"resolution_ladder", d.resolution_ladder},
        {"ladder_advance_fraction", d.ladder_advance_fraction},
        {"learning_rate", d.learning_rate},
        {"perceptual_weight", d.perceptual_weight},
        {"init_sigma", d.init_sigma},
        {"resample_noise", d.resample_noise},
        {"continue_latent", d.continue_latent},
        {"sds",
         {{"t_min_frac", d.sds.t_min_frac},
          {"t_max_frac", d.sds.t_max_frac},
          {"anneal_tmax", d.sds.anneal_tmax},
          {"iterations", d.sds.iterations},
          {"views_per_iteration", d.sds.views_per_iteration},
          {"checkpoint_every", d.sds.checkpoint_every}}}}},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  Reader root(j, "");
  root.get("seed", cfg.seed);
  root.get("run_id", cfg.run_id);
  root.get_path("output_dir", cfg.output_dir);
  root.get("dump_images", cfg.dump_images);
  {
    Reader r = root.child("scene");
    r.get_path("path", cfg.scene_path);
    r.get_optional("seed", cfg.scene_seed);
    r.get("gt_resolution", cfg.gt_resolution);
    r.finish();
  }
  {
    Reader r = root.child("grid");
    r.get("n_az", cfg.grid.n_az);
    r.get("n_el", cfg.grid.n_el);
    r.get("az_range", cfg.grid.az_range);
    r.get("el_range", cfg.grid.el_range);
    r.get("radius", cfg.grid.radius);
    r.get("fov_y", cfg.grid.fov_y_deg);
    r.get("width", cfg.grid.width);
    r.get("height", cfg.grid.height);
    r.finish();
  }
  {
    Reader r = root.child("holdout");
    r.get("count", cfg.holdout_count);
    r.finish();
  }
  {
    Reader r = root.child("field");
    r.get("resolution", cfg.field_resolution);
    r.finish();
  }
  {
    Reader r = root.child("schedule");
    r.get("train_steps", cfg.schedule.train_steps);
    r.get("beta_min", cfg.schedule.beta_min);
    r.get("beta_max", cfg.schedule.beta_max);
    r.finish();
  }
  {
    Reader r = root.child("render");
    r.get("samples_per_ray", cfg.render.samples_per_ray);
    r.get("near", cfg.render.near);
    r.get("far", cfg.render.far);
    r.get("background", cfg.render.background);
    r.get("termination", cfg.render.termination);
    r.finish();
  }
  {
    Reader r = root.child("prior");
    r.get("kind", cfg.prior);
    r.get_path("weights", cfg.prior_weights);
    Reader o = r.child("oracle");
    o.get("amplitude", cfg.oracle.amplitude);
    o.get("smoothness_px", cfg.oracle.smoothness_px);
    o.get("r_max_px", cfg.oracle.r_max_px);
    o.get("conditioning", cfg.oracle.conditioning);
    o.get("reference_width", cfg.oracle.reference_width);
    o.finish();
    r.finish();
  }
  {
    auto& d = cfg.distill;
    Reader r = root.child("distill");
    std::string strategy = to_string(d.strategy);
    r.get("strategy", strategy);
    d.strategy = as_config_error([&] { return parse_strategy(strategy); });
    r.get("K", d.ddim_steps);
    r.get("stage1_fraction", d.stage1_fraction);
    r.get("N", d.iterations_per_refresh);
    r.get("cfg_scale", d.cfg_scale);
    r.get_optional("stage2_cfg_scale", d.stage2_cfg_scale);
    r.get("stage2_budget", d.stage2_budget);
    r.get("plateau_window", d.plateau_window);
    r.get("plateau_tolerance", d.plateau_tolerance);
    r.get("patch_count", d.patch_count);
    r.get("patch_size", d.patch_size);
    r.get("resolution_ladder", d.resolution_ladder);
    r.get("ladder_advance_fraction", d.ladder_advance_fraction);
    r.get("learning_rate", d.learning_rate);
    r.get("perceptual_weight", d.perceptual_weight);
    r.get("init_sigma", d.init_sigma);
    r.get("resample_noise", d.resample_noise);
    r.get("continue_latent", d.continue_latent);
    Reader s = r.child("sds");
    s.get("t_min_frac", d.sds.t_min_frac);
    s.get("t_max_frac", d.sds.t_max_frac);
    s.get("anneal_tmax", d.sds.anneal_tmax);
    s.get("iterations", d.sds.iterations);
    s.get("views_per_iteration", d.sds.views_per_iteration);
    s.get("checkpoint_every", d.sds.checkpoint_every);
    s.finish();
    r.finish();
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("--set: unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

// ---------------------------------------------------------------------------
// Experiments

std::string metrics_row(const RunReport& r) {
  std::ostringstream os;
  os << r.run_id << ',' << to_string(r.strategy) << ',' << r.seed << ',' << fmt(r.cfg_scale) << ','
     << fmt(r.stage1_fraction) << ',' << fmt(r.metrics.psnr) << ',' << fmt(r.metrics.ssim) << ','
     << fmt(r.metrics.mse) << ',' << fmt(r.metrics.perceptual) << ',' << fmt(r.metrics.leakage) << ','
     << r.iterations;
  return os.str();
}

namespace {

std::vector<Image> gt_at(const VoxelField& gt, const std::vector<Camera>& cams, int side, const RenderConfig& rc) {
  std::vector<Camera> scaled;
  for (const auto& c : cams) scaled.push_back(c.with_resolution(side, side));
  std::vector<Image> out(scaled.size());
  parallel_for(scaled.size(), [&](std::size_t v) { out[v] = render_view(gt, scaled[v], rc); });
  return out;
}

void write_history(const std::vector<HistoryRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kHistoryHeader << '\n';
  for (const auto& h : rows)
    out << h.phase << ',' << h.step << ',' << h.t << ',' << h.resolution << ',' << h.iteration << ',' << fmt(h.loss)
        << ',' << fmt(h.target_hf) << ',' << fmt(h.heldout_mse) << '\n';
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto& dir = cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());

  const SceneSpec spec = cfg.scene_path.empty() ? generate_scene(cfg.effective_scene_seed())
                                                : as_config_error([&] { return load_scene(cfg.scene_path); });
  const VoxelField gt = bake_scene(spec, cfg.gt_resolution);
  const NoiseSchedule sched(cfg.schedule.train_steps, cfg.schedule.beta_min, cfg.schedule.beta_max);
  const auto cameras = camera_grid(cfg.grid);
  const auto holdout = holdout_cameras(cfg.grid, cfg.holdout_count, cfg.seed);
  const auto gt_holdout = render_gt(gt, holdout, cfg.render);

  DistillConfig dcfg = cfg.distill;
  dcfg.seed = cfg.seed;
  std::vector<int> rungs = dcfg.resolution_ladder;
  std::sort(rungs.begin(), rungs.end());
  rungs.erase(std::unique(rungs.begin(), rungs.end()), rungs.end());

  std::unique_ptr<DenoiserPrior> prior;
  if (cfg.prior == "oracle") {
    OracleConfig ocfg = cfg.oracle;
    ocfg.seed = cfg.seed;
    auto oracle = std::make_unique<OracleDenoiser>(ocfg, sched, gt_at(gt, cameras, rungs.front(), cfg.render));
    for (std::size_t i = 1; i < rungs.size(); ++i) oracle->add_resolution(gt_at(gt, cameras, rungs[i], cfg.render));
    prior = std::move(oracle);
  } else {
    auto toy = std::make_unique<ToyDenoiser>(load_toy(cfg.prior_weights));
    if (static_cast<std::size_t>(toy->config().views) != cameras.size())
      throw ConfigError("toy prior was trained for " + std::to_string(toy->config().views) + " views, grid has " +
                        std::to_string(cameras.size()));
    if (toy->config().train_steps != sched.train_steps())
      throw ConfigError("toy prior was trained with a different schedule length");
    prior = std::move(toy);
  }

  RunReport report;
  {
    const auto final_gt = gt_at(gt, cameras, dcfg.resolution_ladder.back(), cfg.render);
    for (const auto& g : final_gt) report.gt_hf += high_frequency_energy(g, 2.0) / static_cast<double>(final_gt.size());
  }

  DistillContext ctx;
  ctx.cameras = cameras;
  ctx.prior = prior.get();
  ctx.sched = sched;
  ctx.render = cfg.render;
  ctx.probe = [&](const VoxelField& f) { return heldout_mse(f, holdout, gt_holdout, cfg.render); };
  if (cfg.dump_images) {
    std::filesystem::create_directories(dir / "targets");
    ctx.on_targets = [&](const std::string& tag, const TargetSet& set) {
      for (std::size_t v = 0; v < set.size(); ++v)
        write_ppm(set.targets[v], dir / "targets" / (tag + indexed("_v", v, ".ppm")));
    };
  }

  const DistillResult result = distill(ctx, dcfg, cfg.field_resolution);
  report.run_id = cfg.run_id;
  report.strategy = dcfg.strategy;
  report.seed = cfg.seed;
  report.cfg_scale = dcfg.cfg_scale;
  report.stage1_fraction = dcfg.strategy == Strategy::kStage1Only   ? 1.0
                           : dcfg.strategy == Strategy::kStage2Only ? 0.0
                                                                    : dcfg.stage1_fraction;
  report.metrics = evaluate(result.field, holdout, gt_holdout, gt, cfg.render);
  report.iterations = result.iterations;
  report.history = result.history;

  {
    auto out = open_out(dir / "metrics.csv");
    out << kMetricsHeader << '\n' << metrics_row(report) << '\n';
  }
  write_history(report.history, dir / "history.csv");
  {
    auto out = open_out(dir / "config.json");
    out << to_json(cfg).dump(2) << '\n';
  }
  save_field(result.field, dir / "field.bin");
  for (std::size_t v = 0; v < holdout.size(); ++v) {
    write_ppm(render_view(result.field, holdout[v], cfg.render), dir / indexed("heldout_", v, ".ppm"));
    if (cfg.dump_images) write_ppm(gt_holdout[v], dir / indexed("heldout_gt_", v, ".ppm"));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  {
    auto out = open_out(dir / "timing.csv");
    out << "run_id,seconds\n" << report.run_id << ',' << fmt(report.seconds) << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

void SweepSpec::validate() const {
  if (axis != "cfg_scale" && axis != "stage1_fraction" && axis != "strategy")
    throw ConfigError("sweep axis must be cfg_scale, stage1_fraction or strategy");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
}

std::vector<nlohmann::json> default_sweep_values(const std::string& axis) {
  if (axis == "cfg_scale") return {5.0, 10.0, 19.0, 30.0};
  if (axis == "stage1_fraction") return {1.0, 0.8, 0.6, 0.3, 0.0};
  if (axis == "strategy") return {"progressive", "stage1_only", "stage2_only"};
  throw ConfigError("no default values for sweep axis '" + axis + "'");
}

namespace {

std::string value_label(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.is_number() ? fmt(v.get<double>()) : v.dump();
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') c = '_';
  return s;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec& sweep, int workers) {
  sweep.validate();
  json base = to_json(sweep.base);
  std::vector<SweepRow> rows;
  std::vector<ExperimentConfig> configs;
  for (const auto& value : sweep.values)
    for (auto seed : sweep.seeds) {
      json doc = base;
      doc["distill"][sweep.axis] = value;
      doc["seed"] = seed;
      const std::string label = sweep.axis + "_" + value_label(value);
      doc["run_id"] = label + "_seed" + std::to_string(seed);
      doc["output_dir"] = (sweep.base.output_dir / label / ("seed_" + std::to_string(seed))).string();
      configs.push_back(config_from_json(doc));
      rows.push_back({value, seed, false, {}, {}});
    }
  for (const auto& c : configs) c.validate();

  {
    ThreadScope scope(std::max(1, workers));
    parallel_for(configs.size(), [&](std::size_t i) {
      try {
        rows[i].report = run_experiment(configs[i]);
        rows[i].ok = true;
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    });
  }

  std::filesystem::create_directories(sweep.base.output_dir);
  {
    auto out = open_out(sweep.base.output_dir / "runs.csv");
    out << "value,status," << kMetricsHeader << ",error\n";
    for (const auto& r : rows) {
      out << value_label(r.value) << ',' << (r.ok ? "ok" : "failed") << ',';
      if (r.ok) {
        out << metrics_row(r.report) << ",";
      } else {
        out << r.report.run_id << ",,,,,,,,,,,";
        std::string msg = r.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << msg;
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(sweep.base.output_dir / "sweep.csv");
    out << "axis,value,runs,failed";
    for (const char* m : {"psnr", "ssim", "mse", "perceptual", "leakage"}) out << ',' << m << "_mean," << m << "_std";
    out << '\n';
    for (const auto& value : sweep.values) {
      std::vector<Metrics> ok;
      int failed = 0;
      for (const auto& r : rows)
        if (r.value == value) {
          if (r.ok)
            ok.push_back(r.report.metrics);
          else
            ++failed;
        }
      out << sweep.axis << ',' << value_label(value) << ',' << ok.size() << ',' << failed;
      for (auto member : {&Metrics::psnr, &Metrics::ssim, &Metrics::mse, &Metrics::perceptual, &Metrics::leakage}) {
        double mean = 0.0;
        for (const auto& m : ok) mean += m.*member;
        mean = ok.empty() ? std::nan("") : mean / static_cast<double>(ok.size());
        double var = 0.0;
        for (const auto& m : ok) var += (m.*member - mean) * (m.*member - mean);
        const double sd = ok.size() > 1 ? std::sqrt(var / static_cast<double>(ok.size() - 1)) : 0.0;
        out << ',' << fmt(mean) << ',' << fmt(sd);
      }
      out << '\n';
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CLI

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool dump_images = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config JSON");
  cmd->add_option("--set", o.sets, "Dotted override key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--threads", o.threads, "Worker threads (default: DISTILLAB_THREADS or 1)")->check(CLI::PositiveNumber);
  cmd->add_flag("--dump-images", o.dump_images, "Write target sets and ground-truth renders as PPM");
}

ExperimentConfig resolve(const CommonOptions& o) {
  json doc = to_json(o.config.empty() ? ExperimentConfig{} : load_config(o.config));
  for (const auto& s : o.sets) apply_override(doc, s);
  if (o.seed) doc["seed"] = *o.seed;
  if (o.dump_images) doc["dump_images"] = true;
  if (!o.out.empty()) doc["output_dir"] = o.out;
  return config_from_json(doc);
}

void print_metrics(const RunReport& r) {
  std::cout << kMetricsHeader << '\n' << metrics_row(r) << '\n';
  std::cerr << "wrote " << r.iterations << " iterations in " << fmt(r.seconds) << " s\n";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int cli(int argc, const char* const* argv) {
  CLI::App app{"Progressive distillation of 2D diffusion priors into voxel radiance fields", "distillab"};
  app.set_version_flag("--version", std::string("distillab ") + DISTILLAB_VERSION);
  app.require_subcommand(1);

  CommonOptions common;

  std::uint64_t scene_seed = 0;
  std::string scene_out;
  auto* gen = app.add_subcommand("gen-scene", "Generate a scene description");
  gen->add_option("--seed", scene_seed, "Scene seed");
  gen->add_option("--out", scene_out, "Output scene JSON")->required();

  std::string render_scene;
  std::string render_field;
  auto* render = app.add_subcommand("render", "Render the camera grid of a scene or saved field");
  add_common(render, common);
  render->add_option("--scene", render_scene, "Scene JSON (overrides the config)");
  render->add_option("--field", render_field, "Render this field blob instead of the ground truth");
  render->add_option("--out", common.out, "Output directory")->required();

  std::string prior_scene;
  std::string prior_out;
  int prior_steps = 2000;
  int prior_side = 32;
  auto* train = app.add_subcommand("train-prior", "Train the toy denoiser on ground-truth grid views");
  add_common(train, common);
  train->add_option("--scene", prior_scene, "Scene JSON (default: generated from the seed)");
  train->add_option("--out", prior_out, "Output weights blob")->required();
  train->add_option("--steps", prior_steps, "Training steps")->check(CLI::NonNegativeNumber);
  train->add_option("--resolution", prior_side, "Training image side (multiple of 4)")->check(CLI::PositiveNumber);

  auto* distill_cmd = app.add_subcommand("distill", "Run one distillation experiment");
  add_common(distill_cmd, common);
  distill_cmd->add_option("--out", common.out, "Output directory (overrides output_dir)");

  std::string eval_field;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved field on the held-out views");
  add_common(eval, common);
  eval->add_option("--field", eval_field, "Field blob")->required();

  std::string axis = "stage1_fraction";
  std::string values;
  std::string seeds = "0";
  auto* sweep = app.add_subcommand("sweep", "Run an ablation sweep");
  add_common(sweep, common);
  sweep->add_option("--axis", axis, "cfg_scale, stage1_fraction or strategy");
  sweep->add_option("--values", values, "Comma-separated values (default: the axis defaults)");
  sweep->add_option("--seeds", seeds, "Comma-separated seeds");
  sweep->add_option("--out", common.out, "Output directory (overrides output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (common.threads) set_thread_count(*common.threads);

    if (*gen) {
      save_scene(generate_scene(scene_seed), scene_out);
      return 0;
    }

    if (*render) {
      ExperimentConfig cfg = resolve(common);
      if (!render_scene.empty()) cfg.scene_path = render_scene;
      cfg.validate();
      std::filesystem::create_directories(cfg.output_dir);
      VoxelField field;
      if (!render_field.empty()) {
        if (!std::ifstream(render_field)) throw ConfigError("cannot read field " + render_field);
        field = load_field(render_field);
      } else {
        const SceneSpec spec =
            cfg.scene_path.empty() ? generate_scene(cfg.effective_scene_seed()) : load_scene(cfg.scene_path);
        field = bake_scene(spec, cfg.gt_resolution);
      }
      const auto cams = camera_grid(cfg.grid);
      for (std::size_t v = 0; v < cams.size(); ++v)
        write_ppm(render_view(field, cams[v], cfg.render), cfg.output_dir / indexed("view_", v, ".ppm"));
      return 0;
    }

    if (*train) {
      ExperimentConfig cfg = resolve(common);
      if (!prior_scene.empty()) cfg.scene_path = prior_scene;
      cfg.validate();
      if (prior_side % 4 != 0) throw ConfigError("--resolution must be a multiple of 4");
      const SceneSpec spec =
          cfg.scene_path.empty() ? generate_scene(cfg.effective_scene_seed()) : load_scene(cfg.scene_path);
      const VoxelField gt = bake_scene(spec, cfg.gt_resolution);
      const auto cams = camera_grid(cfg.grid);
      const auto views = gt_at(gt, cams, prior_side, cfg.render);
      std::vector<std::pair<int, Image>> data;
      for (std::size_t v = 0; v < views.size(); ++v) data.emplace_back(static_cast<int>(v), views[v]);
      const NoiseSchedule sched(cfg.schedule.train_steps, cfg.schedule.beta_min, cfg.schedule.beta_max);
      ToyDenoiser toy(ToyConfig{static_cast<int>(cams.size()), cfg.seed, sched.train_steps()});
      const auto trace = toy_train(toy, data, sched, prior_steps, 1e-3, cfg.seed);
      save_toy(toy, prior_out);
      if (!trace.smoothed.empty())
        std::cerr << "smoothed loss " << fmt(trace.smoothed.front()) << " -> " << fmt(trace.smoothed.back()) << '\n';
      return 0;
    }

    if (*distill_cmd) {
      print_metrics(run_experiment(resolve(common)));
      return 0;
    }

    if (*eval) {
      const ExperimentConfig cfg = resolve(common);
      cfg.validate();
      if (!std::ifstream(eval_field)) throw ConfigError("cannot read field " + eval_field);
      const VoxelField field = load_field(eval_field);
      const SceneSpec spec =
          cfg.scene_path.empty() ? generate_scene(cfg.effective_scene_seed()) : load_scene(cfg.scene_path);
      const VoxelField gt = bake_scene(spec, cfg.gt_resolution);
      const auto holdout = holdout_cameras(cfg.grid, cfg.holdout_count, cfg.seed);
      const Metrics m = evaluate(field, holdout, render_gt(gt, holdout, cfg.render), gt, cfg.render);
      std::cout << "psnr,ssim,mse,perceptual,leakage\n"
                << fmt(m.psnr) << ',' << fmt(m.ssim) << ',' << fmt(m.mse) << ',' << fmt(m.perceptual) << ','
                << fmt(m.leakage) << '\n';
      return 0;
    }

    if (*sweep) {
      SweepSpec spec;
      spec.base = resolve(common);
      spec.axis = axis;
      if (values.empty()) {
        spec.values = default_sweep_values(axis);
      } else {
        for (const auto& v : split_list(values)) {
          json parsed = json::parse(v, nullptr, false);
          spec.values.push_back(parsed.is_discarded() ? json(v) : parsed);
        }
      }
      spec.seeds.clear();
      for (const auto& s : split_list(seeds)) {
        try {
          spec.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw ConfigError("--seeds: '" + s + "' is not a seed");
        }
      }
      const int workers = common.threads.value_or(thread_count());
      set_thread_count(1);
      const auto rows = run_sweep(spec, workers);
      const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok; });
      std::cout << "wrote " << (spec.base.output_dir / "sweep.csv").string() << " (" << rows.size() << " runs, "
                << failed << " failed)\n";
      return failed == 0 ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace distillab
