#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "hvscale/error.hpp"
#include "hvscale/io.hpp"
#include "hvscale/optimizer.hpp"
#include "hvscale/perf_profile.hpp"
#include "hvscale/simulator.hpp"

namespace py = pybind11;
using namespace hvscale;

namespace {

py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

py::object plan_or_none(const std::optional<PipelinePlan>& plan) {
  return plan ? to_python(io::to_json(*plan)) : py::none();
}

py::object solve(const std::string& spec_path, double lambda_rps, const std::string& mode) {
  const auto spec = io::load_pipeline_spec(spec_path);
  if (mode == "vertical") return plan_or_none(solve_vertical(spec, lambda_rps));
  if (mode == "horizontal") return plan_or_none(solve_horizontal(spec, lambda_rps));
  if (mode == "hybrid") return plan_or_none(solve_hybrid(spec, lambda_rps));
  throw InvalidArgument("unknown mode '" + mode + "' (vertical|horizontal|hybrid)");
}

py::dict simulate(const std::string& config_path, std::uint64_t seed, std::optional<std::string> policy) {
  auto cfg = io::load_run_config(config_path);
  if (policy) cfg.policy = io::parse_policy(*policy);
  const auto report = run(io::make_scenario(cfg, seed));
  py::dict out;
  out["aggregates"] = to_python(io::report_json(report)["aggregates"]);
  py::list seconds;
  for (const auto& s : report.seconds) {
    py::dict row;
    row["second"] = s.second;
    row["rps"] = s.rps;
    row["violations"] = s.violations;
    row["drops"] = s.drops;
    row["p99_ms"] = s.p99_ms;
    row["cost_cores"] = s.cost_cores;
    seconds.append(row);
  }
  out["seconds"] = seconds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint horizontal and vertical autoscaling for inference pipelines";

  py::register_exception<Error>(m, "HvscaleError", PyExc_ValueError);

  py::class_<ModelProfile>(m, "ModelProfile")
      .def(py::init([](double gamma, double epsilon, double delta, double eta, int b_max, int c_max,
                       std::string name) {
             ModelProfile p{std::move(name), gamma, epsilon, delta, eta, b_max, c_max};
             p.validate();
             return p;
           }),
           py::arg("gamma"), py::arg("epsilon"), py::arg("delta"), py::arg("eta"), py::arg("b_max") = 16,
           py::arg("c_max") = 16, py::arg("name") = "model")
      .def_readonly("name", &ModelProfile::name)
      .def_readonly("gamma", &ModelProfile::gamma)
      .def_readonly("epsilon", &ModelProfile::epsilon)
      .def_readonly("delta", &ModelProfile::delta)
      .def_readonly("eta", &ModelProfile::eta)
      .def_readonly("b_max", &ModelProfile::b_max)
      .def_readonly("c_max", &ModelProfile::c_max)
      .def("latency", [](const ModelProfile& p, int b, int c) { return latency(p, b, c); },
           py::arg("batch"), py::arg("cores"))
      .def("throughput", [](const ModelProfile& p, int b, int c) { return throughput(p, b, c); },
           py::arg("batch"), py::arg("cores"))
      .def("__repr__", [](const ModelProfile& p) { return "ModelProfile(" + io::to_json(p).dump() + ")"; });

  m.def(
      "fit_profile",
      [](const std::vector<std::tuple<int, int, double>>& rows, int b_max, int c_max, std::string name) {
        std::vector<ProfileSample> samples;
        for (const auto& [b, c, l] : rows) samples.push_back({b, c, l});
        return fit_profile(samples, b_max, c_max, std::move(name));
      },
      py::arg("samples"), py::arg("b_max") = 16, py::arg("c_max") = 16, py::arg("name") = "model",
      "Fit latency coefficients to (batch, cores, latency_ms) samples.");
  m.def("load_profile_csv", [](const std::string& path, int b_max, int c_max) {
        return fit_profile(io::load_profile_samples(path), b_max, c_max);
      },
      py::arg("path"), py::arg("b_max") = 16, py::arg("c_max") = 16);
  m.def("solve", &solve, py::arg("spec_path"), py::arg("lambda_rps"), py::arg("mode") = "vertical",
        "Optimal plan for a pipeline spec file as a dict, or None when infeasible.");
  m.def("simulate", &simulate, py::arg("config_path"), py::arg("seed"), py::arg("policy") = py::none(),
        "Run a simulation config and return aggregates and per-second rows.");
}
