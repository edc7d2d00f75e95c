// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "distillab/blob.hpp"
#include "distillab/parallel.hpp"

namespace distillab {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inverse: argument must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

VoxelField::VoxelField(int resolution, Parameterization parameterization, float density_fill, float color_fill)
    : resolution_(resolution), parameterization_(parameterization) {
  if (resolution < 2) throw std::invalid_argument("voxel field resolution must be at least 2");
  const auto n = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution) *
                 static_cast<std::size_t>(resolution);
  density_.assign(n, density_fill);
  color_.assign(3 * n, color_fill);
}

VoxelField VoxelField::optimizable(int resolution, double initial_sigma) {
  return VoxelField(resolution, Parameterization::kRaw, static_cast<float>(softplus_inverse(initial_sigma)), 0.0f);
}

double VoxelField::sigma_at_node(std::size_t node) const {
  const double v = density_[node];
  return parameterization_ == Parameterization::kRaw ? softplus(v) : v;
}

Rgb VoxelField::color_at_node(std::size_t node) const {
  Rgb out{};
  for (std::size_t c = 0; c < 3; ++c) {
    const double v = color_[3 * node + c];
    out[c] = parameterization_ == Parameterization::kRaw ? sigmoid(v) : v;
  }
  return out;
}

namespace {

struct Lookup {
  std::size_t base = 0;
  double fx = 0.0;
  double fy = 0.0;
  double fz = 0.0;
};

bool locate(const VoxelField& field, const Vec3& p, Lookup& out) {
  if (p.x < -1.0 || p.x > 1.0 || p.y < -1.0 || p.y > 1.0 || p.z < -1.0 || p.z > 1.0) return false;
  const int r = field.resolution();
  const double scale = 0.5 * (r - 1);
  auto axis = [&](double coord, double& frac) {
    const double u = (coord + 1.0) * scale;
    const int i = std::min(static_cast<int>(u), r - 2);
    frac = u - i;
    return i;
  };
  const int i = axis(p.x, out.fx);
  const int j = axis(p.y, out.fy);
  const int k = axis(p.z, out.fz);
  out.base = field.node_index(i, j, k);
  return true;
}

// The eight lattice nodes around a lookup, corner order (di, dj, dk) bit-packed.
std::array<std::size_t, 8> corner_index(const VoxelField& field, std::size_t base) {
  const auto r = static_cast<std::size_t>(field.resolution());
  const std::size_t rr = r * r;
  return {base, base + 1, base + r, base + r + 1, base + rr, base + rr + 1, base + rr + r, base + rr + r + 1};
}

std::array<double, 8> corner_weight(const Lookup& at) {
  const double gx = 1.0 - at.fx;
  const double gy = 1.0 - at.fy;
  const double gz = 1.0 - at.fz;
  return {gx * gy * gz,    at.fx * gy * gz,    gx * at.fy * gz,    at.fx * at.fy * gz,
          gx * gy * at.fz, at.fx * gy * at.fz, gx * at.fy * at.fz, at.fx * at.fy * at.fz};
}

struct Interpolated {
  double density = 0.0;  // stored-space value
  Rgb color{};           // stored-space values
};

Interpolated interpolate(const VoxelField& field, const Lookup& at) {
  const auto density = field.density();
  const auto color = field.color();
  const auto idx = corner_index(field, at.base);
  const auto w = corner_weight(at);
  Interpolated out;
  for (std::size_t n = 0; n < 8; ++n) {
    out.density += w[n] * density[idx[n]];
    const float* c = color.data() + 3 * idx[n];
    out.color[0] += w[n] * c[0];
    out.color[1] += w[n] * c[1];
    out.color[2] += w[n] * c[2];
  }
  return out;
}

FieldSample activate(const VoxelField& field, const Interpolated& in) {
  FieldSample s;
  if (field.parameterization() == Parameterization::kRaw) {
    s.sigma = softplus(in.density);
    for (std::size_t c = 0; c < 3; ++c) s.color[c] = sigmoid(in.color[c]);
  } else {
    s.sigma = std::max(0.0, in.density);
    s.color = in.color;
  }
  return s;
}

// Density and color of each node side by side, so one lookup touches one
// 16-byte record per corner.
struct PackedField {
  int resolution = 0;
  bool raw = true;
  std::vector<std::array<float, 4>> nodes;

  explicit PackedField(const VoxelField& field)
      : resolution(field.resolution()), raw(field.parameterization() == Parameterization::kRaw) {
    const auto density = field.density();
    const auto color = field.color();
    nodes.resize(density.size());
    for (std::size_t n = 0; n < nodes.size(); ++n)
      nodes[n] = {density[n], color[3 * n], color[3 * n + 1], color[3 * n + 2]};
  }
};

bool locate(const PackedField& field, const Vec3& p, Lookup& out) {
  if (p.x < -1.0 || p.x > 1.0 || p.y < -1.0 || p.y > 1.0 || p.z < -1.0 || p.z > 1.0) return false;
  const int r = field.resolution;
  const double scale = 0.5 * (r - 1);
  auto axis = [&](double coord, double& frac) {
    const double u = (coord + 1.0) * scale;
    const int i = std::min(static_cast<int>(u), r - 2);
    frac = u - i;
    return i;
  };
  const auto ur = static_cast<std::size_t>(r);
  const auto i = static_cast<std::size_t>(axis(p.x, out.fx));
  const auto j = static_cast<std::size_t>(axis(p.y, out.fy));
  const auto k = static_cast<std::size_t>(axis(p.z, out.fz));
  out.base = (k * ur + j) * ur + i;
  return true;
}

std::array<double, 4> interpolate(const PackedField& field, const Lookup& at) {
  const auto r = static_cast<std::size_t>(field.resolution);
  const std::size_t rr = r * r;
  const std::array<std::size_t, 8> idx{at.base,          at.base + 1,          at.base + r,      at.base + r + 1,
                                       at.base + rr,     at.base + rr + 1,     at.base + rr + r, at.base + rr + r + 1};
  const auto w = corner_weight(at);
  std::array<double, 4> out{};
  for (std::size_t n = 0; n < 8; ++n) {
    const auto& v = field.nodes[idx[n]];
    for (std::size_t c = 0; c < 4; ++c) out[c] += w[n] * v[c];
  }
  return out;
}

struct SampleRecord {
  Lookup at;
  /// d(sigma)/d(stored density) at this sample.
  double density_slope = 0.0;
  FieldSample value;
  double alpha = 0.0;
  double transmittance = 0.0;  // before this sample
};

// Index range of stratified midpoints that can fall inside [-1,1]^3.
std::pair<int, int> sample_range(const Ray& ray, const RenderConfig& cfg) {
  double t0 = -1e300;
  double t1 = 1e300;
  const std::array<double, 3> o{ray.origin.x, ray.origin.y, ray.origin.z};
  const std::array<double, 3> d{ray.direction.x, ray.direction.y, ray.direction.z};
  for (std::size_t a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < -1.0 || o[a] > 1.0) return {0, 0};
      continue;
    }
    double ta = (-1.0 - o[a]) / d[a];
    double tb = (1.0 - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return {0, 0};
  const double step = cfg.step();
  const int first = static_cast<int>(std::floor((t0 - cfg.near) / step - 0.5)) - 1;
  const int last = static_cast<int>(std::ceil((t1 - cfg.near) / step - 0.5)) + 2;
  return {std::clamp(first, 0, cfg.samples_per_ray), std::clamp(last, 0, cfg.samples_per_ray)};
}

constexpr int kChunk = 16;

// Activations for one chunk of samples, laid out for vectorization.
struct Chunk {
  int count = 0;
  std::array<bool, kChunk> inside{};
  std::array<Lookup, kChunk> at{};
  std::array<double, kChunk> density{};
  std::array<double, kChunk> red{};
  std::array<double, kChunk> green{};
  std::array<double, kChunk> blue{};
  std::array<double, kChunk> sigma{};
  std::array<double, kChunk> slope{};
  std::array<double, kChunk> alpha{};
};

void activate_chunk(Chunk& ch, bool raw, double step) {
  const int n = ch.count;
  if (raw) {
    for (int i = 0; i < n; ++i) {
      const double x = ch.density[i];
      const double e = std::exp(std::min(x, 30.0));
      ch.sigma[i] = x > 30.0 ? x : std::log1p(e);
      ch.slope[i] = e / (1.0 + e);
      ch.red[i] = 1.0 / (1.0 + std::exp(-ch.red[i]));
      ch.green[i] = 1.0 / (1.0 + std::exp(-ch.green[i]));
      ch.blue[i] = 1.0 / (1.0 + std::exp(-ch.blue[i]));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      ch.sigma[i] = std::max(0.0, ch.density[i]);
      ch.slope[i] = ch.density[i] > 0.0 ? 1.0 : 0.0;
    }
  }
  for (int i = 0; i < n; ++i) ch.alpha[i] = 1.0 - std::exp(-ch.sigma[i] * step);
}

// Marches one ray front to back. When `records` is non-null, every in-bounds
// sample is recorded for the backward pass. Activations are evaluated a chunk
// at a time so the transcendental functions vectorize.
Composite trace(const PackedField& field, const Ray& ray, const RenderConfig& cfg,
                std::vector<SampleRecord>* records) {
  if (records) records->clear();
  const double step = cfg.step();
  const bool raw = field.raw;
  const auto [first, last] = sample_range(ray, cfg);
  double transmittance = 1.0;
  Rgb color{0.0, 0.0, 0.0};
  Chunk ch;
  bool done = false;
  for (int s0 = first; s0 < last && !done; s0 += kChunk) {
    ch.count = std::min(kChunk, last - s0);
    for (int i = 0; i < ch.count; ++i) {
      const double t = cfg.near + (s0 + i + 0.5) * step;
      ch.inside[i] = locate(field, ray.origin + ray.direction * t, ch.at[i]);
      if (ch.inside[i]) {
        const auto v = interpolate(field, ch.at[i]);
        ch.density[i] = v[0];
        ch.red[i] = v[1];
        ch.green[i] = v[2];
        ch.blue[i] = v[3];
      } else {
        ch.density[i] = ch.red[i] = ch.green[i] = ch.blue[i] = 0.0;
      }
    }
    activate_chunk(ch, raw, step);
    for (int i = 0; i < ch.count; ++i) {
      if (!ch.inside[i]) continue;
      const Rgb c{ch.red[i], ch.green[i], ch.blue[i]};
      const double w = transmittance * ch.alpha[i];
      for (std::size_t k = 0; k < 3; ++k) color[k] += w * c[k];
      if (records) records->push_back({ch.at[i], ch.slope[i], {ch.sigma[i], c}, ch.alpha[i], transmittance});
      transmittance *= 1.0 - ch.alpha[i];
      if (transmittance < cfg.termination) {
        done = true;
        break;
      }
    }
  }
  Composite out;
  for (std::size_t c = 0; c < 3; ++c) out.color[c] = color[c] + transmittance * cfg.background[c];
  out.opacity = 1.0 - transmittance;
  return out;
}

constexpr std::size_t kGradLanes = 8;

struct RayRef {
  std::size_t camera;
  int x;
  int y;
  std::size_t patch;
  int px;
  int py;
};

std::vector<RayRef> enumerate_rays(std::span<const Camera> cameras, std::span<const ViewPatch> patches) {
  std::vector<RayRef> rays;
  std::size_t total = 0;
  for (const auto& vp : patches) total += static_cast<std::size_t>(vp.patch.size) * static_cast<std::size_t>(vp.patch.size);
  rays.reserve(total);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto& vp = patches[p];
    if (vp.camera >= cameras.size()) throw std::out_of_range("view patch references a missing camera");
    const Camera& cam = cameras[vp.camera];
    if (!vp.patch.fits(cam.width, cam.height)) throw std::out_of_range("patch outside the camera image");
    for (int y = 0; y < vp.patch.size; ++y)
      for (int x = 0; x < vp.patch.size; ++x) rays.push_back({vp.camera, vp.patch.col + x, vp.patch.row + y, p, x, y});
  }
  return rays;
}

}  // namespace

FieldSample sample_trilinear(const VoxelField& field, const Vec3& p) {
  Lookup at;
  if (!locate(field, p, at)) return {};
  return activate(field, interpolate(field, at));
}

void RenderConfig::validate() const {
  if (samples_per_ray < 2) throw std::invalid_argument("samples_per_ray must be at least 2");
  if (!(near < far)) throw std::invalid_argument("render near must be less than far");
}

Composite composite_ray(std::span<const CompositeSample> samples, const Rgb& background) {
  double transmittance = 1.0;
  Rgb color{0.0, 0.0, 0.0};
  for (const auto& s : samples) {
    const double alpha = 1.0 - std::exp(-s.sigma * s.delta);
    const double w = transmittance * alpha;
    for (std::size_t c = 0; c < 3; ++c) color[c] += w * s.color[c];
    transmittance *= 1.0 - alpha;
  }
  Composite out;
  for (std::size_t c = 0; c < 3; ++c) out.color[c] = color[c] + transmittance * background[c];
  out.opacity = 1.0 - transmittance;
  return out;
}

std::vector<Image> render_batch(const VoxelField& field, std::span<const Camera> cameras, const RenderConfig& cfg,
                                std::span<const ViewPatch> patches) {
  cfg.validate();
  const auto rays = enumerate_rays(cameras, patches);
  std::vector<Image> out;
  out.reserve(patches.size());
  for (const auto& vp : patches) out.emplace_back(vp.patch.size, vp.patch.size);
  const PackedField packed(field);
  std::vector<PixelRays> views(cameras.begin(), cameras.end());
  const std::size_t chunk = 256;
  parallel_for((rays.size() + chunk - 1) / chunk, [&](std::size_t block) {
    const std::size_t end = std::min(rays.size(), (block + 1) * chunk);
    for (std::size_t r = block * chunk; r < end; ++r) {
      const auto& ray = rays[r];
      const Composite px = trace(packed, views[ray.camera](ray.x, ray.y), cfg, nullptr);
      Image& img = out[ray.patch];
      for (int c = 0; c < 3; ++c) img.at(ray.px, ray.py, c) = px.color[static_cast<std::size_t>(c)];
    }
  });
  return out;
}

Image render_view(const VoxelField& field, const Camera& camera, const RenderConfig& cfg) {
  cfg.validate();
  Image img(camera.width, camera.height);
  const PackedField packed(field);
  const PixelRays view(camera);
  parallel_for(static_cast<std::size_t>(camera.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < camera.width; ++x) {
      const Composite px = trace(packed, view(x, y), cfg, nullptr);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = px.color[static_cast<std::size_t>(c)];
    }
  });
  return img;
}

std::vector<Image> render_patches(const VoxelField& field, const Camera& camera, const RenderConfig& cfg,
                                  std::span<const PatchSpec> patches) {
  std::vector<ViewPatch> batch;
  batch.reserve(patches.size());
  for (const auto& p : patches) batch.push_back({0, p});
  return render_batch(field, std::span(&camera, 1), cfg, batch);
}

bool FieldGrad::is_zero() const {
  return std::all_of(density.begin(), density.end(), [](double v) { return v == 0.0; }) &&
         std::all_of(color.begin(), color.end(), [](double v) { return v == 0.0; });
}

FieldGrad backward(const VoxelField& field, std::span<const Camera> cameras, const RenderConfig& cfg,
                   std::span<const ViewPatch> patches, std::span<const Image> pixel_grads) {
  cfg.validate();
  if (pixel_grads.size() != patches.size()) throw ShapeMismatch("backward: one gradient image per patch required");
  for (std::size_t p = 0; p < patches.size(); ++p) {
    if (pixel_grads[p].width() != patches[p].patch.size || pixel_grads[p].height() != patches[p].patch.size)
      throw ShapeMismatch("backward: gradient image " + std::to_string(p) + " does not match its patch");
  }
  const auto rays = enumerate_rays(cameras, patches);
  const std::size_t nodes = field.node_count();
  const bool raw = field.parameterization() == Parameterization::kRaw;
  const double step = cfg.step();
  const PackedField packed(field);
  std::vector<PixelRays> views(cameras.begin(), cameras.end());

  // Lane buffers are reused across calls from the same thread; fresh
  // multi-megabyte allocations per call cost more than the accumulation.
  thread_local std::vector<std::vector<double>> workspace(kGradLanes);
  auto& lanes = workspace;  // a plain reference, so workers see this thread's buffers
  std::array<bool, kGradLanes> used{};
  parallel_for(kGradLanes, [&](std::size_t lane) {
    const std::size_t begin = rays.size() * lane / kGradLanes;
    const std::size_t end = rays.size() * (lane + 1) / kGradLanes;
    if (begin == end) return;
    used[lane] = true;
    // Per node: density then three color channels.
    std::vector<double>& g = lanes[lane];
    g.assign(4 * nodes, 0.0);
    std::vector<SampleRecord> records;
    for (std::size_t r = begin; r < end; ++r) {
      const auto& ray = rays[r];
      const Image& up = pixel_grads[ray.patch];
      const Rgb dl{up.at(ray.px, ray.py, 0), up.at(ray.px, ray.py, 1), up.at(ray.px, ray.py, 2)};
      if (dl[0] == 0.0 && dl[1] == 0.0 && dl[2] == 0.0) continue;
      const Composite out = trace(packed, views[ray.camera](ray.x, ray.y), cfg, &records);
      const double t_final = 1.0 - out.opacity;
      Rgb behind{t_final * cfg.background[0], t_final * cfg.background[1], t_final * cfg.background[2]};
      for (auto it = records.rbegin(); it != records.rend(); ++it) {
        const SampleRecord& s = *it;
        const double w = s.transmittance * s.alpha;
        const double t_next = s.transmittance * (1.0 - s.alpha);
        double d_sigma = 0.0;
        for (std::size_t c = 0; c < 3; ++c) d_sigma += dl[c] * (t_next * s.value.color[c] - behind[c]);
        d_sigma *= step;
        for (std::size_t c = 0; c < 3; ++c) behind[c] += w * s.value.color[c];

        const double d_density = d_sigma * s.density_slope;
        Rgb d_color{};
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = s.value.color[c];
          d_color[c] = dl[c] * w * (raw ? v * (1.0 - v) : 1.0);
        }
        const auto idx_all = corner_index(field, s.at.base);
        const auto weights = corner_weight(s.at);
        for (std::size_t n = 0; n < 8; ++n) {
          const double cw = weights[n];
          double* node = g.data() + 4 * idx_all[n];
          node[0] += cw * d_density;
          node[1] += cw * d_color[0];
          node[2] += cw * d_color[1];
          node[3] += cw * d_color[2];
        }
      }
    }
  });

  FieldGrad total;
  total.density.assign(nodes, 0.0);
  total.color.assign(3 * nodes, 0.0);
  for (std::size_t lane = 0; lane < kGradLanes; ++lane) {
    if (!used[lane]) continue;
    const double* g = lanes[lane].data();
    for (std::size_t i = 0; i < nodes; ++i) {
      total.density[i] += g[4 * i];
      total.color[3 * i] += g[4 * i + 1];
      total.color[3 * i + 1] += g[4 * i + 2];
      total.color[3 * i + 2] += g[4 * i + 3];
    }
  }
  return total;
}

FieldGrad backward(const VoxelField& field, const Camera& camera, const RenderConfig& cfg, const Image& pixel_grads) {
  if (camera.width != camera.height) throw ShapeMismatch("backward: full-view gradients require a square camera");
  const ViewPatch vp{0, PatchSpec{0, 0, camera.width}};
  return backward(field, std::span(&camera, 1), cfg, std::span(&vp, 1), std::span(&pixel_grads, 1));
}

void adam_step(std::span<float> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_step: parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("adam_step: moment buffers do not match parameters");
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] = static_cast<float>(params[i] - state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
  }
}

FieldOptimizer::FieldOptimizer(double lr, double beta1, double beta2, double epsilon) {
  for (AdamState* s : {&density_, &color_}) {
    s->lr = lr;
    s->beta1 = beta1;
    s->beta2 = beta2;
    s->epsilon = epsilon;
  }
}

void FieldOptimizer::step(VoxelField& field, const FieldGrad& grad) {
  adam_step(field.density(), grad.density, density_);
  adam_step(field.color(), grad.color, color_);
}

namespace {
const auto kFieldMagic = make_magic("DLABVOX1");
}

void save_field(const VoxelField& field, const std::filesystem::path& path) {
  Blob blob;
  blob.magic = kFieldMagic;
  blob.header = {static_cast<std::uint32_t>(field.resolution()), static_cast<std::uint32_t>(field.parameterization())};
  blob.payload.reserve(field.density().size() + field.color().size());
  blob.payload.insert(blob.payload.end(), field.density().begin(), field.density().end());
  blob.payload.insert(blob.payload.end(), field.color().begin(), field.color().end());
  write_blob(blob, path);
}

VoxelField load_field(const std::filesystem::path& path) {
  const Blob blob = read_blob(path, kFieldMagic, 2);
  const int r = static_cast<int>(blob.header[0]);
  if (blob.header[1] > 1) throw std::runtime_error(path.string() + ": unknown field parameterization");
  VoxelField field(r, static_cast<Parameterization>(blob.header[1]), 0.0f, 0.0f);
  if (blob.payload.size() != field.density().size() + field.color().size())
    throw std::runtime_error(path.string() + ": payload size does not match resolution");
  std::copy_n(blob.payload.begin(), field.density().size(), field.density().begin());
  std::copy(blob.payload.begin() + static_cast<std::ptrdiff_t>(field.density().size()), blob.payload.end(),
            field.color().begin());
  return field;
}

}  // namespace distillab
