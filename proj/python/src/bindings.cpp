#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "cfpa/experiments.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python layer does the dict conversion.
json parse(const std::string& text) { return text.empty() ? json::object() : json::parse(text); }

cfpa::SolverOptions options_from(const std::string& text) {
  cfpa::SolverOptions o;
  cfpa::from_json(parse(text), o);
  o.validate();
  return o;
}

cfpa::ExperimentSpec spec_from(const std::string& kind, const std::string& text) {
  cfpa::ExperimentSpec s = cfpa::ExperimentSpec::defaults(cfpa::parse_experiment_kind(kind));
  cfpa::merge_spec_json(parse(text), s);
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Power allocation for cell-free massive MIMO with non-linear amplifiers";

  py::register_exception<cfpa::CovarianceError>(m, "CovarianceError", PyExc_ValueError);

  m.def("generate_scenario", [](const std::string& config) {
    cfpa::ScenarioConfig c = parse(config).get<cfpa::ScenarioConfig>();
    return cfpa::scenario_to_json(cfpa::generate_scenario(c)).dump();
  });

  m.def(
      "build_problem_inputs",
      [](const std::string& config, const std::vector<double>& se_targets) {
        const cfpa::ScenarioConfig c = parse(config).get<cfpa::ScenarioConfig>();
        const cfpa::Scenario sc = cfpa::generate_scenario(c);
        return cfpa::problem_inputs_to_json(cfpa::build_statistics(sc), cfpa::power_params(c),
                                            se_targets)
            .dump();
      },
      py::arg("config"), py::arg("se_targets") = std::vector<double>{});

  py::class_<cfpa::ProblemData>(m, "Problem")
      .def(py::init([](const std::string& text, bool normalize_noise) {
             return cfpa::problem_from_json(json::parse(text), normalize_noise);
           }),
           py::arg("inputs"), py::arg("normalize_noise") = true)
      .def_readonly("num_users", &cfpa::ProblemData::num_users)
      .def_readonly("num_aps", &cfpa::ProblemData::num_aps)
      .def_readonly("p_max", &cfpa::ProblemData::p_max)
      .def_readonly("gamma_bar", &cfpa::ProblemData::gamma_bar)
      .def_property_readonly("dimension", &cfpa::ProblemData::dimension)
      .def("with_common_target", &cfpa::with_common_target, py::arg("gamma"))
      .def("sinr", [](const cfpa::ProblemData& d, const Eigen::VectorXd& x) { return cfpa::sinr(x, d); })
      .def("constraint_values",
           [](const cfpa::ProblemData& d, const Eigen::VectorXd& x) { return cfpa::constraint_values(x, d); })
      .def("transmit_power",
           [](const cfpa::ProblemData& d, const Eigen::VectorXd& x) { return cfpa::per_ap_transmit_power(x, d); })
      .def(
          "consumed_power",
          [](const cfpa::ProblemData& d, const Eigen::VectorXd& x, const std::string& model) {
            return cfpa::consumed_power(x, cfpa::parse_power_model(model), d).total;
          },
          py::arg("x"), py::arg("model") = "non-linear");

  m.def(
      "solve",
      [](const cfpa::ProblemData& d, const std::string& options) {
        const cfpa::SolverOptions o = options_from(options);
        cfpa::SolverResult r;
        {
          py::gil_scoped_release release;
          r = cfpa::penalty_minimize(d, o);
        }
        return py::make_tuple(cfpa::result_to_json(r).dump(), r.x);
      },
      py::arg("problem"), py::arg("options") = "");

  m.def(
      "max_min",
      [](const cfpa::ProblemData& d, const std::string& options, double tol) {
        const cfpa::SolverOptions o = options_from(options);
        py::gil_scoped_release release;
        const cfpa::MaxMinReport r = cfpa::max_min_sinr(d, o, tol);
        json j = {{"conclusive", r.conclusive}, {"probes", r.probes}, {"bisection_tol", r.bisection_tol},
                  {"se_lower", r.se_lower}, {"se_upper", r.se_upper}};
        j["se"] = r.se ? json(*r.se) : json(nullptr);
        j["gamma"] = r.gamma ? json(*r.gamma) : json(nullptr);
        return j.dump();
      },
      py::arg("problem"), py::arg("options") = "", py::arg("bisection_tol") = 0.01);

  m.def("grid_search", [](const cfpa::ProblemData& d, double resolution, const std::string& model) {
    return cfpa::oracle_to_json(cfpa::grid_search(d, resolution, cfpa::parse_power_model(model))).dump();
  });
  m.def("single_link_closed_form", [](const cfpa::ProblemData& d, const std::string& model) {
    return cfpa::oracle_to_json(cfpa::single_link_closed_form(d, cfpa::parse_power_model(model))).dump();
  });

  m.def("config_hash", [](const std::string& kind, const std::string& spec) {
    return cfpa::config_hash(spec_from(kind, spec));
  });
  m.def("sweep_runtime", [](const std::string& spec) {
    const cfpa::ExperimentSpec s = spec_from("sweep-runtime", spec);
    py::gil_scoped_release release;
    return cfpa::runtime_csv(cfpa::sweep_runtime(s), cfpa::config_hash(s));
  });
  m.def("sweep_savings", [](const std::string& spec) {
    const cfpa::ExperimentSpec s = spec_from("sweep-savings", spec);
    py::gil_scoped_release release;
    return cfpa::savings_csv(cfpa::sweep_savings(s), s.bisection_tol, cfpa::config_hash(s));
  });
  m.def("sparsity", [](const std::string& spec) {
    const cfpa::ExperimentSpec s = spec_from("sparsity", spec);
    py::gil_scoped_release release;
    const cfpa::SparsityStudy st = cfpa::sparsity_study(s);
    const std::string hash = cfpa::config_hash(s);
    return py::make_tuple(cfpa::sparsity_csv(st, hash), cfpa::sparsity_counts_csv(st, hash));
  });
}
