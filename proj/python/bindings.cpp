#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "voyagecast/config.hpp"
#include "voyagecast/error.hpp"
#include "voyagecast/eval.hpp"
#include "voyagecast/pipeline.hpp"
#include "voyagecast/timeline.hpp"

namespace py = pybind11;
namespace vc = voyagecast;

namespace {

vc::TimelineConfig timeline(double delta_hours) {
  vc::TimelineConfig cfg;
  cfg.delta = vc::Seconds(static_cast<long long>(delta_hours * 3600.0));
  cfg.validate();
  return cfg;
}

py::dict aggregate(const vc::eval::Aggregate& a) {
  py::dict d;
  d["mae"] = a.mae;
  d["mape"] = a.mape;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Container-ship sailing duration forecasting";

  auto validation = py::register_exception<vc::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<vc::ShapeError>(m, "ShapeError", validation.ptr());
  py::register_exception<vc::ConfigError>(m, "ConfigError", validation.ptr());
  py::register_exception<vc::IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "window_of",
      [](const std::string& when, double delta_hours) {
        return vc::window_of(vc::parse_timestamp(when), timeline(delta_hours));
      },
      py::arg("timestamp"), py::arg("delta_hours") = 6.0, "1-based window index of an ISO-8601 UTC instant");
  m.def(
      "window_identifier",
      [](vc::WindowIndex t, double delta_hours) {
        const auto id = vc::window_identifier(t, timeline(delta_hours));
        return py::make_tuple(id.weekday, id.slot);
      },
      py::arg("t"), py::arg("delta_hours") = 6.0, "(weekday, slot) of a window, Monday = 0");
  m.def(
      "window_bounds",
      [](vc::WindowIndex t, double delta_hours) {
        const auto b = vc::window_bounds(t, timeline(delta_hours));
        return py::make_tuple(vc::format_timestamp(b.start), vc::format_timestamp(b.end));
      },
      py::arg("t"), py::arg("delta_hours") = 6.0);

  py::class_<vc::RunConfig>(m, "Config")
      .def(py::init([](const std::string& path, const std::vector<std::string>& overrides) {
             return vc::resolve_config(path, overrides);
           }),
           py::arg("path") = "", py::arg("overrides") = std::vector<std::string>{})
      .def("render", [](const vc::RunConfig& c) { return vc::render_config(c); })
      .def("__str__", [](const vc::RunConfig& c) { return vc::render_config(c); })
      .def_static("keys", &vc::config_keys);

  m.def(
      "sensitivity_regression",
      [](const std::vector<double>& x, const std::vector<double>& y, double level) {
        const auto r = vc::eval::sensitivity_regression(x, y, level);
        py::dict d;
        d["slope"] = r.slope;
        d["intercept"] = r.intercept;
        d["slope_std_error"] = r.slope_std_error;
        d["ci"] = py::make_tuple(r.ci_low, r.ci_high);
        d["n"] = r.n;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("level") = 0.95);

  // Pipeline commands. Each reads and writes files under the configured
  // directories, relative to the current working directory.
  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def("synth", &vc::pipeline::synth, py::arg("config"), release);
  m.def(
      "preprocess",
      [](const vc::RunConfig& cfg) {
        vc::ingest::SegmentationDiagnostics d;
        {
          py::gil_scoped_release nogil;
          d = vc::pipeline::preprocess(cfg);
        }
        py::dict out;
        out["points"] = d.points;
        out["voyages"] = d.voyages;
        out["berthing_events"] = d.berthing_events;
        return out;
      },
      py::arg("config"));
  m.def("counts", &vc::pipeline::counts, py::arg("config"), release);
  m.def("featurize", &vc::pipeline::featurize, py::arg("config"), release);
  m.def(
      "train",
      [](const vc::RunConfig& cfg) {
        vc::train::FitResult r;
        {
          py::gil_scoped_release nogil;
          r = vc::pipeline::train(cfg);
        }
        py::dict out;
        out["best_epoch"] = r.best_epoch;
        out["best_val_loss"] = r.best_val_loss;
        out["epochs"] = r.log.size();
        out["diverged"] = r.diverged;
        return out;
      },
      py::arg("config"));
  m.def(
      "evaluate",
      [](const vc::RunConfig& cfg) {
        vc::eval::MetricsReport r;
        {
          py::gil_scoped_release nogil;
          r = vc::pipeline::evaluate(cfg);
        }
        py::dict out;
        out["weighted"] = aggregate(r.weighted);
        out["unweighted"] = aggregate(r.unweighted);
        out["step_mae"] = r.profile.mae;
        out["step_mape"] = r.profile.mape;
        out["records"] = r.records.size();
        out["segments"] = r.segments.size();
        return out;
      },
      py::arg("config"));
}
