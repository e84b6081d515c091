// Python bindings. Sample arrays are (n, 3) float64 in deg/s; 3-vectors are tuples.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "gyrocal/calib.hpp"
#include "gyrocal/dataset.hpp"
#include "gyrocal/error_model.hpp"
#include "gyrocal/eval.hpp"
#include "gyrocal/experiment.hpp"
#include "gyrocal/nn.hpp"

namespace py = pybind11;
using namespace gyrocal;
namespace fs = std::filesystem;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Vec3 = std::tuple<double, double, double>;

AngularRate rate(const Vec3& v) { return {std::get<0>(v), std::get<1>(v), std::get<2>(v)}; }
Vec3 tuple_of(const AngularRate& r) { return {r.x, r.y, r.z}; }

std::vector<AngularRate> samples_from(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument("samples must have shape (n, 3)");
  std::vector<AngularRate> out(static_cast<std::size_t>(a.shape(0)));
  const auto v = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {v(i, 0), v(i, 1), v(i, 2)};
  return out;
}

Array array_from(const std::vector<AngularRate>& samples) {
  Array out({static_cast<py::ssize_t>(samples.size()), py::ssize_t{3}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int a = 0; a < 3; ++a) v(i, a) = samples[i][a];
  }
  return out;
}

GyroRecording recording_from(const Array& samples, double sample_rate_hz) {
  GyroRecording r;
  r.samples = samples_from(samples);
  r.sample_rate_hz = sample_rate_hz;
  r.validate();
  return r;
}

py::dict report_dict(const ComparisonReport& r) {
  return py::module_::import("json").attr("loads")(to_json(r).dump());
}

ExperimentSpec spec_with(const fs::path& path, std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
  ExperimentSpec spec = load_spec(path);
  if (seed) spec.seed = *seed;
  if (out) spec.out = fs::absolute(*out);
  spec.validate();
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gyroscope bias calibration toolkit";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);

  m.def(
      "simulate_recording",
      [](const Vec3& bias, const Vec3& noise_std, std::size_t n_samples, double sample_rate_hz, std::uint64_t seed) {
        return array_from(simulate_stationary_recording(rate(bias), rate(noise_std), n_samples, sample_rate_hz, seed).samples);
      },
      py::arg("bias"), py::arg("noise_std"), py::arg("n_samples"), py::arg("sample_rate_hz"), py::arg("seed"));

  m.def(
      "zero_order_bias",
      [](const Array& samples, double sample_rate_hz, double window_s) {
        return tuple_of(zero_order_bias(recording_from(samples, sample_rate_hz), window_s));
      },
      py::arg("samples"), py::arg("sample_rate_hz"), py::arg("window_s"));

  m.def(
      "running_average",
      [](const Array& samples, double sample_rate_hz) {
        const auto c = running_average_curve(recording_from(samples, sample_rate_hz));
        return py::make_tuple(c.times, array_from(c.values));
      },
      py::arg("samples"), py::arg("sample_rate_hz"), "Returns (times, (n, 3) running means).");

  m.def(
      "model_based_rmse_curve",
      [](const std::vector<Array>& recordings, double sample_rate_hz) {
        std::vector<GyroRecording> recs;
        for (const auto& r : recordings) recs.push_back(recording_from(r, sample_rate_hz));
        const auto c = model_based_rmse_curve(recs);
        return py::make_tuple(c.times, c.rmse);
      },
      py::arg("recordings"), py::arg("sample_rate_hz"),
      "Running RMSE of the zero-order estimate against each recording's full mean.");

  m.def(
      "rmse", [](const std::vector<double>& est, const std::vector<double>& gt) { return rmse(est, gt); },
      py::arg("estimates"), py::arg("ground_truths"));

  m.def(
      "crossing_time",
      [](const std::vector<double>& times, const std::vector<double>& values, double target) {
        return crossing_time(RmseCurve{times, values}, target);
      },
      py::arg("times"), py::arg("rmse"), py::arg("target_rmse"));

  m.def(
      "improvement_report",
      [](double window_s, double nn_rmse, const std::vector<double>& times, const std::vector<double>& values) {
        return report_dict(improvement_report(window_s, nn_rmse, RmseCurve{times, values}));
      },
      py::arg("window_s"), py::arg("nn_rmse"), py::arg("times"), py::arg("rmse"));

  m.def(
      "bayes_posterior_mean_uniform",
      [](const Array& window, const Vec3& noise_std, const Vec3& lo, const Vec3& hi) {
        const auto s = samples_from(window);
        return tuple_of(bayes_posterior_mean(s, rate(noise_std), BiasPrior::uniform(rate(lo), rate(hi))));
      },
      py::arg("window"), py::arg("noise_std"), py::arg("lo"), py::arg("hi"));

  m.def(
      "write_virtual_dataset",
      [](const fs::path& root, std::size_t n_gyros, std::size_t recordings_per_gyro, std::size_t n_samples,
         const Vec3& lo, const Vec3& hi, const Vec3& noise_std, double sample_rate_hz, std::uint64_t seed,
         const std::string& brand) {
        VirtualDatasetConfig c;
        c.brand = brand;
        c.n_gyros = n_gyros;
        c.recordings_per_gyro = recordings_per_gyro;
        c.n_samples = n_samples;
        c.prior = BiasPrior::uniform(rate(lo), rate(hi));
        c.noise_std = rate(noise_std);
        c.sample_rate_hz = sample_rate_hz;
        return write_dataset(generate_virtual_dataset(c, seed), root);
      },
      py::arg("root"), py::arg("n_gyros"), py::arg("recordings_per_gyro"), py::arg("n_samples"),
      py::arg("lo") = Vec3{-0.5, -0.5, -0.5}, py::arg("hi") = Vec3{0.5, 0.5, 0.5},
      py::arg("noise_std") = Vec3{0.04, 0.04, 0.04}, py::arg("sample_rate_hz") = 150.0, py::arg("seed") = 0,
      py::arg("brand") = "virtual", "Generates a virtual dataset and returns its manifest path.");

  m.def(
      "ingest",
      [](const fs::path& manifest) {
        const Dataset ds = ingest_csv(manifest);
        py::list recs;
        for (const auto& r : ds.recordings) {
          py::dict d;
          d["gyro_id"] = r.gyro_id;
          d["recording_index"] = r.recording_index;
          d["provenance"] = to_string(r.provenance);
          d["samples"] = array_from(r.samples);
          d["gt_bias"] = tuple_of(label_of(r));
          recs.append(d);
        }
        py::dict out;
        out["brand"] = ds.brand;
        out["sample_rate_hz"] = ds.sample_rate_hz;
        out["recordings"] = recs;
        return out;
      },
      py::arg("manifest"));

  py::class_<nn::CnnModel>(m, "CnnModel")
      .def_static(
          "load",
          [](const fs::path& path) {
            const auto ck = nn::load_checkpoint(path);
            return nn::CnnModel(ck.config, ck.params);
          },
          py::arg("path"))
      .def_property_readonly("in_channels", &nn::CnnModel::in_channels)
      .def_property_readonly("window_len", &nn::CnnModel::window_len)
      .def(
          "predict",
          [](const nn::CnnModel& model, const Array& window) {
            if (window.ndim() != 2) throw std::invalid_argument("window must have shape (channels, samples)");
            Matrix x(window.shape(0), window.shape(1));
            std::copy(window.data(), window.data() + window.size(), x.data().begin());
            return model.predict(x);
          },
          py::arg("window"), "Bias per channel for a (channels, samples) window.");

  m.def(
      "simulate",
      [](const fs::path& spec, std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
        std::vector<fs::path> manifests;
        for (const auto& e : run_simulate(spec_with(spec, seed, out)).entries) manifests.push_back(e.manifest);
        return manifests;
      },
      py::arg("spec"), py::arg("seed") = py::none(), py::arg("out") = py::none());

  m.def(
      "train",
      [](const fs::path& spec, std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
        const auto s = spec_with(spec, seed, out);
        py::gil_scoped_release release;
        std::vector<fs::path> paths;
        for (const auto& t : run_train(s)) paths.push_back(checkpoint_path(s.out, t.window_s));
        return paths;
      },
      py::arg("spec"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      "Trains one model per window and returns the checkpoint paths.");

  m.def(
      "evaluate",
      [](const fs::path& spec, std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
        const auto res = run_eval(spec_with(spec, seed, out));
        py::list reports;
        for (const auto& r : res.reports) reports.append(report_dict(r));
        return reports;
      },
      py::arg("spec"), py::arg("seed") = py::none(), py::arg("out") = py::none());
}
