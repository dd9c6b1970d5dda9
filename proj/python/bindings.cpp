#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tdmpc/analysis.hpp"
#include "tdmpc/coordinator.hpp"
#include "tdmpc/errors.hpp"
#include "tdmpc/io.hpp"
#include "tdmpc/oracle.hpp"
#include "tdmpc/plant.hpp"

namespace py = pybind11;
using namespace tdmpc;

namespace {

// Round-trip through the Python json module keeps the bindings free of a json caster.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict trace_dict(const ClosedLoopTrace& t) {
  py::dict d;
  d["x"] = t.x;
  d["u"] = t.u;
  d["lambda"] = t.lambda;
  d["violation"] = t.violation;
  d["truncated"] = t.truncated;
  d["infeasible_step"] = t.infeasible_step;
  d["iterations"] = t.iterations;
  d["epsilon"] = t.epsilon;
  d["alpha"] = t.alpha;
  d["metadata"] = to_py(trace_metadata(t));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Truncated dual-decomposition MPC";

  static py::exception<Error> base(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      base(("[" + e.name() + "] " + e.what()).c_str());
    }
  });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("horizon", &Scenario::horizon)
      .def_readonly("epsilon", &Scenario::epsilon)
      .def_readonly("iterations", &Scenario::iterations)
      .def_readonly("sim_steps", &Scenario::sim_steps)
      .def_readonly("hash", &Scenario::hash)
      .def_property_readonly("num_agents", [](const Scenario& s) { return s.agents.size(); })
      .def_property_readonly("initial_state", &Scenario::stacked_initial_state)
      .def("to_dict", [](const Scenario& s) { return to_py(scenario_to_json(s)); });

  m.def("load_scenario", [](const std::string& path) { return load_scenario(path); }, py::arg("path"));
  m.def("scenario_from_dict", [](const py::object& doc) { return scenario_from_json(from_py(doc)); },
        py::arg("doc"));
  m.def("validate", [](const Scenario& s) {
    auto r = validate_assumptions(s);
    return py::make_tuple(r.passed(), r.summary());
  });

  py::class_<ShiftedScenario>(m, "ShiftedScenario")
      .def_readonly("scenario", &ShiftedScenario::scenario)
      .def("unshift_state", &ShiftedScenario::unshift_state)
      .def("shift_state", &ShiftedScenario::shift_state);
  m.def("shift_to_target", &shift_to_target);

  py::class_<GlobalQP>(m, "GlobalQP")
      .def_readonly("b", &GlobalQP::b)
      .def_readonly("horizon", &GlobalQP::horizon)
      .def_property_readonly("num_agents", &GlobalQP::num_agents)
      .def_property_readonly("coupling_rows", &GlobalQP::coupling_rows)
      .def_property_readonly("total_states", &GlobalQP::total_states)
      .def_property_readonly("total_inputs", &GlobalQP::total_inputs)
      .def("cost", &eval_condensed_cost, py::arg("u"), py::arg("x"))
      .def("to_dict", [](const GlobalQP& g) { return to_py(condensed_to_json(g)); });
  m.def("build_global_qp", &build_global_qp);

  m.def("lipschitz_constant", &lipschitz_constant, py::arg("g"), py::arg("epsilon"));
  m.def("lipschitz_constant_aggregate", &lipschitz_constant_aggregate, py::arg("g"), py::arg("epsilon"));
  m.def("default_step", &default_step);
  m.def("min_iterations", &min_iterations, py::arg("alpha"), py::arg("epsilon"));
  m.def("contraction_factor", &contraction_factor, py::arg("alpha"), py::arg("epsilon"), py::arg("iters"));

  m.def(
      "run_ada",
      [](const VectorXd& lambda0, const VectorXd& x, int iters, const GlobalQP& g, double eps, double alpha) {
        AdaOptions opts;
        opts.record_diagnostics = false;
        auto r = run_ada(lambda0, x, iters, g, eps, alpha, opts);
        return py::make_tuple(r.lambda, r.mu);
      },
      py::arg("lambda0"), py::arg("x"), py::arg("iters"), py::arg("g"), py::arg("epsilon"), py::arg("alpha"),
      "Returns (lambda_l, mu_l).");
  m.def("dual_cost", [](const VectorXd& l, const VectorXd& x, const GlobalQP& g, double eps) {
    return dual_cost(l, x, g, eps);
  });

  m.def(
      "solve_centralized",
      [](const GlobalQP& g, const VectorXd& x, double eps) {
        auto s = solve_centralized(g, x, eps);
        py::dict d;
        d["u"] = s.u_star;
        d["lambda"] = s.lambda_star;
        d["value"] = s.value;
        d["objective"] = s.objective;
        d["kkt_residual"] = s.kkt_residual;
        return d;
      },
      py::arg("g"), py::arg("x"), py::arg("epsilon"));
  m.def("optimal_feedback", &optimal_feedback);
  m.def("regularized_feedback", &regularized_feedback);
  m.def("value_function", &value_function);

  m.def(
      "simulate",
      [](const Scenario& s, std::optional<int> iters, std::optional<int> steps, std::optional<double> eps,
         const std::string& disturbance, double scale, std::uint64_t seed) {
        SimOptions opts = sim_options_from(s);
        if (iters) opts.iterations = *iters;
        if (steps) opts.steps = *steps;
        if (eps) opts.epsilon = *eps;
        auto dist = make_disturbance(disturbance, scenario_disturbance_bound(s, scale), seed);
        return trace_dict(simulate_closed_loop(s, opts, dist));
      },
      py::arg("scenario"), py::arg("iters") = py::none(), py::arg("steps") = py::none(),
      py::arg("epsilon") = py::none(), py::arg("disturbance") = "zero", py::arg("scale") = 1.0,
      py::arg("seed") = 0);

  m.def("condensation_self_test", [](const Scenario& s, int samples, std::uint64_t seed) {
    return to_py(analysis::condensation_self_test(s, samples, seed).to_json());
  });
}
