#include <doctest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/scenarios.hpp"
#include "tdmpc/errors.hpp"
#include "tdmpc/io.hpp"
#include "tdmpc/model.hpp"
#include "tdmpc/riccati.hpp"

using namespace tdmpc;
using namespace tdmpc::testing;

namespace {
MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }
}  // namespace

TEST_CASE("dare: A = 0 gives P = Q and zero gain") {
  auto sol = solve_dare(scalar(0), scalar(1), scalar(1), scalar(1));
  CHECK(sol.P(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(sol.K(0, 0)) < 1e-14);
}

TEST_CASE("dare: scalar integrator gives the golden ratio") {
  auto sol = solve_dare(scalar(1), scalar(1), scalar(1), scalar(1));
  const double P = sol.P(0, 0);
  // root of P^2 - P - 1 = 0
  CHECK(std::abs(P * P - P - 1.0) < 1e-10);
  CHECK(std::abs(P - riccati_iterate(scalar(1), scalar(1), scalar(1), scalar(1), 200)(0, 0)) < 1e-12);
}

TEST_CASE("dare: double integrator residual") {
  MatrixXd A(2, 2), B(2, 1);
  A << 1, 1, 0, 1;
  B << 0, 1;
  const MatrixXd Q = MatrixXd::Identity(2, 2);
  auto sol = solve_dare(A, B, Q, scalar(1));
  CHECK((riccati_map(A, B, Q, scalar(1), sol.P) - sol.P).norm() <= 1e-10);
  CHECK((sol.P - riccati_iterate(A, B, Q, scalar(1), 5000)).norm() < 1e-9);
  const MatrixXd res = terminal_decrease_residual(A, B, Q, scalar(1), sol.P, sol.K);
  CHECK(res.norm() < 1e-9);
  // closed loop is stable
  const MatrixXd Acl = A - B * sol.K;
  CHECK(Eigen::EigenSolver<MatrixXd>(Acl).eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("dare: unstabilizable pair does not converge") {
  DareOptions opts;
  opts.max_iterations = 2000;
  CHECK_THROWS_AS(solve_dare(scalar(2), scalar(0), scalar(1), scalar(1), opts), NoConvergence);
}

TEST_CASE("polytope helpers") {
  VectorXd lo(2), hi(2);
  lo << -1, -2;
  hi << 1, 2;
  const Polytope box = Polytope::box(lo, hi);
  CHECK(box.rows() == 4);
  CHECK(box.contains(VectorXd::Zero(2)));
  CHECK_FALSE(box.contains(VectorXd::Constant(2, 1.5)));
  CHECK(Polytope::origin(3).contains(VectorXd::Zero(3)));
  CHECK_FALSE(Polytope::origin(3).contains(VectorXd::Unit(3, 1)));
  CHECK(Polytope::whole_space(2).contains(VectorXd::Constant(2, 1e9)));
}

TEST_CASE("bundled formation3 loads") {
  Scenario s = load_scenario(scenario_path("formation3.json"));
  CHECK(s.agents.size() == 3);
  for (const auto& a : s.agents) {
    CHECK(a.n() == 4);
    CHECK(a.m() == 2);
    CHECK(a.terminal_mode == TerminalMode::Equality);
  }
  CHECK(s.coupling.rows() == 12);
  CHECK(s.hash.size() == 16);
  CHECK(validate_assumptions(s).passed());
}

TEST_CASE("scenario errors") {
  json doc = scalar_doc();
  doc["agents"] = json::array();
  CHECK_THROWS_AS(scenario_from_json(doc), ValueError);

  doc = scalar_doc();
  doc["agents"][0]["B"] = {{1}, {1}};
  CHECK_THROWS_AS(scenario_from_json(doc), DimensionError);

  doc = scalar_doc();
  doc["agents"][0].erase("A");
  CHECK_THROWS_AS(scenario_from_json(doc), ParseError);

  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ParseError);
}

TEST_CASE("scenario round trip keeps the content hash") {
  Scenario s = scenario_from_json(formation_doc(3, {{0, 1}, {1, 2}}));
  Scenario t = scenario_from_json(scenario_to_json(s));
  CHECK(content_hash(scenario_to_json(s)) == content_hash(scenario_to_json(t)));
  CHECK(t.coupling.rows() == s.coupling.rows());
  CHECK((t.agents[1].A - s.agents[1].A).norm() == 0.0);
}

TEST_CASE("assumption checks") {
  SUBCASE("scalar integrator passes") {
    json doc = scalar_doc();
    doc["agents"][0]["P"] = "dare";
    Scenario s = scenario_from_json(doc);
    auto rep = validate_assumptions(s);
    CHECK(rep.agents[0].stabilizable.passed);
    CHECK(controllable(s.agents[0].A, s.agents[0].B));
    CHECK(rep.passed());
  }
  SUBCASE("terminal weight below the Riccati solution fails the decrease condition") {
    auto rep = validate_assumptions(scenario_from_json(scalar_doc()));
    CHECK_FALSE(rep.agents[0].terminal_decrease.passed);
  }
  SUBCASE("singular Q fails positivity") {
    json doc = formation_doc(1, {});
    doc["agents"][0]["Q"] = {{1, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    auto rep = validate_assumptions(scenario_from_json(doc));
    CHECK_FALSE(rep.agents[0].weights_positive.passed);
  }
  SUBCASE("origin outside the input set") {
    json doc = scalar_doc();
    doc["agents"][0]["input"] = {{"C", {{1}}}, {"c", {-1}}};
    auto rep = validate_assumptions(scenario_from_json(doc));
    CHECK_FALSE(rep.agents[0].origin_interior.passed);
  }
}

TEST_CASE("target shift") {
  SUBCASE("zero target is the identity") {
    Scenario s = scenario_from_json(formation_doc(2, {{0, 1}}));
    auto sh = shift_to_target(s);
    CHECK(sh.shift.is_identity());
    CHECK((sh.scenario.coupling.stacked(sh.scenario.agents).b - s.coupling.stacked(s.agents).b).norm() == 0.0);
  }
  SUBCASE("position targets move the coupling bound") {
    json doc = formation_doc(2, {{0, 1}});
    doc["agents"][0]["target"] = {2.0, 0.0, 1.0, 0.0};
    doc["agents"][1]["target"] = {1.5, 0.0, 1.25, 0.0};
    Scenario s = scenario_from_json(doc);
    auto sh = shift_to_target(s);
    const VectorXd b = sh.scenario.coupling.stacked(sh.scenario.agents).b;
    // rows: +x, -x, +y, -y of p0 - p1 with difference (0.5, -0.25)
    VectorXd expect(4);
    expect << 1 - 0.5, 1 + 0.5, 1 + 0.25, 1 - 0.25;
    CHECK((b - expect).norm() < 1e-14);
    CHECK((sh.unshift_state(sh.shift_state(s.stacked_initial_state())) - s.stacked_initial_state()).norm() < 1e-14);
  }
  SUBCASE("moving target is not an equilibrium") {
    json doc = formation_doc(1, {});
    doc["agents"][0]["target"] = {1.0, 0.5, 0.0, 0.0};
    CHECK_THROWS_AS(shift_to_target(scenario_from_json(doc)), NotEquilibrium);
  }
}

TEST_CASE("coupling row counts") {
  CHECK(scenario_from_json(formation_doc(2, {{0, 1}})).coupling.rows() == 4);
  CHECK(scenario_from_json(formation_doc(3, {{0, 1}, {0, 2}, {1, 2}})).coupling.rows() == 12);
  CHECK(scenario_from_json(formation_doc(1, {})).coupling.rows() == 0);
}
