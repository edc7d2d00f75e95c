// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "distillab/diffusion.hpp"
#include "distillab/distill.hpp"
#include "distillab/field.hpp"
#include "distillab/harness.hpp"
#include "distillab/image.hpp"
#include "distillab/parallel.hpp"
#include "distillab/priors.hpp"
#include "distillab/scene.hpp"

namespace py = pybind11;
using namespace distillab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as (height, width, 3) float64 arrays.
Image to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("expected an array of shape (height, width, 3)");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.data());
  return img;
}

Array to_array(const Image& img) {
  Array a({static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width()), py::ssize_t{3}});
  std::copy(img.data(), img.data() + img.size(), a.mutable_data());
  return a;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["psnr"] = m.psnr;
  d["ssim"] = m.ssim;
  d["mse"] = m.mse;
  d["perceptual"] = m.perceptual;
  d["leakage"] = m.leakage;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "distillab native core";
  m.attr("__version__") = DISTILLAB_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("set_threads", &set_thread_count, py::arg("threads"));
  m.def("threads", &thread_count);

  // Imaging
  m.def("mse", [](const Array& a, const Array& b) { return mse(to_image(a), to_image(b)); });
  m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); });
  m.def("perceptual_dist", [](const Array& a, const Array& b) { return perceptual_dist(to_image(a), to_image(b)); });
  m.def("gaussian_blur", [](const Array& a, double sigma) { return to_array(gaussian_blur(to_image(a), sigma)); },
        py::arg("image"), py::arg("sigma"));
  m.def(
      "split_bands",
      [](const Array& a, double sigma) {
        const Bands b = split_bands(to_image(a), sigma);
        return py::make_tuple(to_array(b.low), to_array(b.high));
      },
      py::arg("image"), py::arg("sigma"));
  m.def("read_ppm", [](const std::filesystem::path& p) { return to_array(read_ppm(p)); });
  m.def("write_ppm", [](const Array& a, const std::filesystem::path& p) { write_ppm(to_image(a), p); });

  // Cameras and scenes
  py::class_<Camera>(m, "Camera")
      .def(py::init<>())
      .def(py::init([](double az, double el, int width, int height, double radius, double fov) {
             Camera c;
             c.azimuth_deg = az;
             c.elevation_deg = el;
             c.width = width;
             c.height = height;
             c.radius = radius;
             c.fov_y_deg = fov;
             c.validate();
             return c;
           }),
           py::arg("azimuth_deg"), py::arg("elevation_deg"), py::arg("width") = 64, py::arg("height") = 64,
           py::arg("radius") = 2.5, py::arg("fov_y_deg") = 40.0)
      .def_readwrite("azimuth_deg", &Camera::azimuth_deg)
      .def_readwrite("elevation_deg", &Camera::elevation_deg)
      .def_readwrite("radius", &Camera::radius)
      .def_readwrite("fov_y_deg", &Camera::fov_y_deg)
      .def_readwrite("width", &Camera::width)
      .def_readwrite("height", &Camera::height)
      .def("with_resolution", &Camera::with_resolution)
      .def("__repr__", [](const Camera& c) {
        return "Camera(azimuth_deg=" + std::to_string(c.azimuth_deg) +
               ", elevation_deg=" + std::to_string(c.elevation_deg) + ", " + std::to_string(c.width) + "x" +
               std::to_string(c.height) + ")";
      });

  m.def(
      "camera_grid",
      [](int n_az, int n_el, int width, int height) {
        GridParams g;
        g.n_az = n_az;
        g.n_el = n_el;
        g.width = width;
        g.height = height;
        return camera_grid(g);
      },
      py::arg("n_az") = 8, py::arg("n_el") = 8, py::arg("width") = 64, py::arg("height") = 64);

  py::class_<SceneSpec>(m, "Scene")
      .def_readonly("seed", &SceneSpec::seed)
      .def_property_readonly("blob_count", [](const SceneSpec& s) { return s.blobs.size(); })
      .def("save", [](const SceneSpec& s, const std::filesystem::path& p) { save_scene(s, p); });
  m.def("generate_scene", &generate_scene, py::arg("seed"));
  m.def("load_scene", &load_scene, py::arg("path"));

  // Fields and rendering
  py::class_<RenderConfig>(m, "RenderConfig")
      .def(py::init<>())
      .def_readwrite("samples_per_ray", &RenderConfig::samples_per_ray)
      .def_readwrite("near", &RenderConfig::near)
      .def_readwrite("far", &RenderConfig::far)
      .def_readwrite("background", &RenderConfig::background)
      .def_readwrite("termination", &RenderConfig::termination);

  py::class_<VoxelField>(m, "VoxelField")
      .def_property_readonly("resolution", &VoxelField::resolution)
      .def_property_readonly("node_count", &VoxelField::node_count)
      .def("save", [](const VoxelField& f, const std::filesystem::path& p) { save_field(f, p); });
  m.def("bake_scene", &bake_scene, py::arg("scene"), py::arg("resolution"));
  m.def("load_field", &load_field, py::arg("path"));
  m.def("optimizable_field", &VoxelField::optimizable, py::arg("resolution"), py::arg("initial_sigma") = 0.1);
  m.def(
      "render_view",
      [](const VoxelField& f, const Camera& c, const RenderConfig& rc) {
        Image img;
        {
          py::gil_scoped_release release;
          img = render_view(f, c, rc);
        }
        return to_array(img);
      },
      py::arg("field"), py::arg("camera"), py::arg("config") = RenderConfig{});
  m.def("leakage", &leakage_metric, py::arg("field"), py::arg("gt_field"));

  // Diffusion
  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<int, double, double>(), py::arg("train_steps") = 1000, py::arg("beta_min") = 1e-4,
           py::arg("beta_max") = 2e-2)
      .def_property_readonly("train_steps", &NoiseSchedule::train_steps)
      .def("alpha_bar", &NoiseSchedule::alpha_bar)
      .def("beta", &NoiseSchedule::beta);
  m.def("ddim_plan", [](int train_steps, int k) { return make_plan(train_steps, k).steps; });
  m.def("q_sample", [](const Array& x0, int t, const Array& eps, const NoiseSchedule& s) {
    return to_array(q_sample(to_image(x0), t, to_image(eps), s));
  });
  m.def("eps_to_x0", [](const Array& z, const Array& eps, int t, const NoiseSchedule& s) {
    return to_array(eps_to_x0(to_image(z), to_image(eps), t, s));
  });
  m.def("x0_to_eps", [](const Array& z, const Array& x0, int t, const NoiseSchedule& s) {
    return to_array(x0_to_eps(to_image(z), to_image(x0), t, s));
  });
  m.def("ddim_step", [](const Array& z, const Array& eps, int t, int t_next, const NoiseSchedule& s) {
    return to_array(ddim_step(to_image(z), to_image(eps), t, t_next, s));
  });

  // Experiments. Configs travel as JSON text; the Python layer converts dicts.
  m.def("default_config_json", [] { return to_json(ExperimentConfig{}).dump(); });
  m.def("normalize_config_json",
        [](const std::string& text) { return to_json(config_from_json(nlohmann::json::parse(text))).dump(); });
  m.def(
      "run_experiment_json",
      [](const std::string& text) {
        const ExperimentConfig cfg = config_from_json(nlohmann::json::parse(text));
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        py::dict d = metrics_dict(r.metrics);
        d["run_id"] = r.run_id;
        d["strategy"] = to_string(r.strategy);
        d["iterations"] = r.iterations;
        d["seconds"] = r.seconds;
        d["output_dir"] = cfg.output_dir;
        return d;
      },
      py::arg("config"));
  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "distillab");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
