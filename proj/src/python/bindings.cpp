// Python bindings. Structured values cross the boundary as JSON text; the
// package wrapper turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "titepk/analysis.hpp"
#include "titepk/comparators.hpp"
#include "titepk/errors.hpp"
#include "titepk/io.hpp"
#include "titepk/service.hpp"
#include "titepk/sim.hpp"

namespace py = pybind11;
using namespace titepk;
using io::json;

namespace {

py::dict pk_profile(double dose, double interval, double half_life, double log_keff, const std::vector<double>& times,
                    double cycle_length) {
  const pk::DosingRegimen r{dose, interval, cycle_length, ""};
  r.validate();
  const auto p = pk::PKParams::from_log_keff(half_life, log_keff);
  p.validate();
  std::vector<double> c, ce, auc;
  for (double t : times) {
    c.push_back(pk::central_concentration(r, p, t));
    ce.push_back(pk::effect_concentration(r, p, t));
    auc.push_back(pk::auc_effect(r, p, t));
  }
  py::dict d;
  d["central"] = c;
  d["effect"] = ce;
  d["auc"] = auc;
  return d;
}

std::string analyze(const std::string& config, const std::string& patients, const std::string& method,
                    const std::string& strata, const std::string& schedule) {
  const auto cfg = io::config_from_json(json::parse(config));
  std::vector<model::PatientOutcome> data;
  for (const auto& p : json::parse(patients)) data.push_back(io::patient_from_json(p));
  analysis::Options o;
  o.method = trial::method_from_string(method);
  o.strata = analysis::strata_from_string(strata);
  o.schedule = schedule;
  return io::report_to_json(analysis::analyze(cfg, data, o)).dump();
}

std::string simulate(const std::string& scenario_file, const std::string& scenario, const std::string& method,
                     const std::string& mode, int reps, std::uint64_t seed, int threads) {
  const auto f = io::scenarios_from_json(json::parse(scenario_file));
  const auto sc = std::find_if(f.scenarios.begin(), f.scenarios.end(),
                               [&](const sim::Scenario& s) { return s.id == scenario; });
  if (sc == f.scenarios.end()) throw InvalidInput("no scenario '" + scenario + "'");
  sim::SimulationSettings set;
  set.design = f.design;
  set.design.method = trial::method_from_string(method);
  set.mode = sim::event_mode_from_string(mode);
  set.reps = reps;
  set.seed = seed;
  set.threads = threads;
  return io::metrics_to_json(sim::replicate(*sc, set)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "TITE-PK dose-finding core";

  py::register_exception<ConfigurationError>(m, "ConfigurationError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

  m.def("pk_profile", &pk_profile, py::arg("dose"), py::arg("interval"), py::arg("half_life"), py::arg("log_keff"),
        py::arg("times"), py::arg("cycle_length") = pk::kDefaultCycleLength);
  m.def(
      "skeleton",
      [](int levels, double target, double halfwidth, int nu) {
        return comparators::lee_cheung_skeleton(levels, target, halfwidth, nu).rounded();
      },
      py::arg("levels"), py::arg("target") = 0.30, py::arg("halfwidth") = 0.10, py::arg("nu"));
  m.def("analyze", &analyze, py::arg("config"), py::arg("patients"), py::arg("method"), py::arg("strata"),
        py::arg("schedule"), py::call_guard<py::gil_scoped_release>());
  m.def("simulate", &simulate, py::arg("scenario_file"), py::arg("scenario"), py::arg("method"), py::arg("mode"),
        py::arg("reps"), py::arg("seed"), py::arg("threads"), py::call_guard<py::gil_scoped_release>());
  m.def("read_dataset", [](const std::string& path) {
    json rows = json::array();
    for (const auto& p : io::read_dataset_file(path)) rows.push_back(io::patient_to_json(p));
    return rows.dump();
  });
  m.def("default_config", [] { return io::config_to_json(trial::TrialConfig{}).dump(); });
  m.def("schemas", [] { return service::TrialService::schemas().dump(); });

  py::class_<service::TrialService>(m, "TrialService")
      .def(py::init([](const std::string& log_dir, const std::string& token) {
             return std::make_unique<service::TrialService>(service::Options{log_dir, token});
           }),
           py::arg("log_dir") = "", py::arg("token") = "")
      .def(
          "handle",
          [](service::TrialService& s, const std::string& method, const std::string& path, const std::string& body,
             const std::string& auth) {
            service::Reply r;
            {
              py::gil_scoped_release nogil;
              r = s.handle(method, path, body, auth);
            }
            return py::make_tuple(r.status, r.body.dump());
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "", py::arg("authorization") = "")
      .def("snapshot", &service::TrialService::snapshot)
      .def_property_readonly("sessions", &service::TrialService::sessions);
}
