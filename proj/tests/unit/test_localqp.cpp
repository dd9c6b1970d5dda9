#include <doctest.h>

#include <random>

#include "support/handmade.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"
#include "tdmpc/errors.hpp"
#include "tdmpc/localqp.hpp"
#include "tdmpc/oracle.hpp"

using namespace tdmpc;
using namespace tdmpc::testing;

TEST_CASE("zero multiplier at the origin gives zero input") {
  GlobalQP g = build_global_qp(scenario_from_json(formation_doc(2, {{0, 1}}, 4)));
  for (const auto& a : g.agents) {
    auto sol = solve_local(a, VectorXd::Zero(4), VectorXd::Zero(g.coupling_rows()));
    CHECK(sol.u.norm() < 1e-14);
    CHECK(sol.value == doctest::Approx(0.0));
    CHECK(sol.active_set.empty());
  }
}

TEST_CASE("scalar subproblem with an inactive bound") {
  // xi = x + u >= -10 written as -x - u <= 10
  auto a = scalar_condensed(2, 1, 1, 0, mat1(-1), mat1(-1), vec1(10));
  auto sol = solve_local(a, vec1(0), vec1(1));
  CHECK(sol.u(0) == doctest::Approx(-0.5));
  CHECK(sol.multipliers(0) == 0.0);
  CHECK(sol.kkt_residual < 1e-12);
}

TEST_CASE("scalar subproblem with an active bound") {
  // u >= 0 active: 2u + 1 - nu = 0 at u = 0
  auto a = scalar_condensed(2, 1, 0, 0, mat1(-1), mat1(0), vec1(0));
  auto sol = solve_local(a, vec1(1), VectorXd::Zero(1));
  CHECK(std::abs(sol.u(0)) < 1e-14);
  CHECK(sol.multipliers(0) == doctest::Approx(1.0));
  REQUIRE(sol.active_set.size() == 1);
  // value includes the 1/2 W x^2 term, here zero
  CHECK(sol.value == doctest::Approx(0.0));
}

TEST_CASE("empty local set is infeasible") {
  MatrixXd C(2, 1);
  C << 1, -1;
  VectorXd c(2);
  c << -1, -1;
  auto a = scalar_condensed(2, 0, 0, 0, C, MatrixXd::Zero(2, 1), c);
  CHECK_THROWS_AS(solve_local(a, vec1(0), VectorXd::Zero(1)), Infeasible);
}

TEST_CASE("violated parameter-only row is infeasible") {
  auto a = scalar_condensed(2, 0, 0, 0, mat1(0), mat1(1), vec1(1));
  CHECK_NOTHROW(solve_local(a, vec1(0.5), VectorXd::Zero(1)));
  CHECK_THROWS_AS(solve_local(a, vec1(2), VectorXd::Zero(1)), Infeasible);
}

TEST_CASE("first input of an unconstrained two-stage problem") {
  Scenario s = scenario_from_json(scalar_doc(2));
  s.agents[0].input_poly = Polytope::whole_space(1);
  GlobalQP g = build_global_qp(s);
  const auto& a = g.agents[0];
  const VectorXd x = vec1(0.7);
  const VectorXd full = -a.H.ldlt().solve(a.G * x);
  CHECK(recover_input(a, x, VectorXd(0)).size() == 1);
  CHECK(recover_input(a, x, VectorXd(0))(0) == doctest::Approx(full(0)).epsilon(1e-12));
}

TEST_CASE("local solves agree with brute force") {
  std::mt19937_64 rng(3);
  // input bounds only, 8 rows keep the enumeration small
  json doc = formation_doc(2, {{0, 1}}, 2);
  for (auto& a : doc["agents"]) a.erase("terminal");
  GlobalQP g = build_global_qp(scenario_from_json(doc));
  for (int trial = 0; trial < 30; ++trial) {
    const auto& a = g.agents[trial % 2];
    const VectorXd x = random_vector(rng, 4, 2.0);
    VectorXd lam = random_vector(rng, g.coupling_rows(), 2.0).cwiseAbs();
    const VectorXd lin = a.G * x + a.E.transpose() * lam;
    auto ref = brute_force_qp(a.H, lin, a.C, a.c - a.D * x);
    REQUIRE(ref.has_value());
    auto sol = solve_local(a, x, lam);
    CHECK((sol.u - *ref).norm() < 1e-8);
  }
}

TEST_CASE("q-mapping at the regularized dual solution reproduces the oracle input") {
  Scenario s = load_scenario(scenario_path("formation3.json"));
  auto sh = shift_to_target(s);
  GlobalQP g = build_global_qp(sh.scenario);
  const VectorXd x = sh.scenario.stacked_initial_state();
  auto o = solve_centralized(g, x, 1e-3);
  const VectorXd q = recover_inputs(g, x, o.lambda_star);
  CHECK((q - g.first_inputs(o.u_star)).norm() <= 1e-7);
}
