// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance <path-to-tdmpc-cli> [--only N]
//
// Exit status is the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "support/oracles.hpp"
#include "tdmpc/analysis.hpp"
#include "tdmpc/condense.hpp"
#include "tdmpc/coordinator.hpp"
#include "tdmpc/errors.hpp"
#include "tdmpc/io.hpp"
#include "tdmpc/oracle.hpp"
#include "tdmpc/plant.hpp"
#include "tdmpc/qp.hpp"

namespace fs = std::filesystem;
using namespace tdmpc;
using namespace tdmpc::testing;

namespace {

std::string cli_path;

std::string scenario_file(const std::string& name) { return std::string(TDMPC_SCENARIO_DIR) + "/" + name; }

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

struct Problem {
  Scenario s;
  ShiftedScenario sh;
  GlobalQP g;
  VectorXd x0;
};

Problem load(const std::string& file) {
  Problem p;
  p.s = load_scenario(scenario_file(file));
  p.sh = shift_to_target(p.s);
  p.g = build_global_qp(p.sh.scenario);
  p.x0 = p.sh.scenario.stacked_initial_state();
  return p;
}

bool in_feasible_region(const GlobalQP& g, const VectorXd& x) {
  try {
    solve_centralized(g, x, 0.0);
    return true;
  } catch (const Infeasible&) {
    return false;
  }
}

// Feasible states in error coordinates around the scenario's initial state.
std::vector<VectorXd> feasible_states(const Problem& p, int count, double spread, std::uint64_t seed,
                                      const std::function<bool(const VectorXd&)>& extra = nullptr) {
  return analysis::sample_states(p.x0, spread, count, seed, [&](const VectorXd& x) {
    return in_feasible_region(p.g, x) && (!extra || extra(x));
  });
}

// ---------------------------------------------------------------------------------------

// Euclidean projection of a random input trajectory onto {local rows, coupling rows} at x.
std::optional<VectorXd> feasible_inputs(const GlobalQP& g, const VectorXd& x, std::mt19937_64& rng) {
  const Eigen::Index nu = g.total_inputs();
  Eigen::Index rows = g.coupling_rows();
  for (const auto& a : g.agents) rows += a.C.rows();
  MatrixXd A = MatrixXd::Zero(rows, nu);
  VectorXd b(rows);
  Eigen::Index r = 0;
  VectorXd fx = g.b;
  for (std::size_t i = 0; i < g.agents.size(); ++i) {
    const auto& a = g.agents[i];
    const VectorXd xi = g.agent_state(x, i);
    A.block(r, g.input_offset(i), a.C.rows(), a.C.cols()) = a.C;
    b.segment(r, a.C.rows()) = a.c - a.D * xi;
    r += a.C.rows();
    if (g.coupling_rows()) {
      A.block(rows - g.coupling_rows(), g.input_offset(i), g.coupling_rows(), a.E.cols()) = a.E;
      fx -= a.F * xi;
    }
  }
  if (g.coupling_rows()) b.tail(g.coupling_rows()) = fx;
  const VectorXd target = random_vector(rng, nu, 1.5);
  const MatrixXd I = MatrixXd::Identity(nu, nu);
  auto res = qp::solve(Eigen::LLT<MatrixXd>(I), -target, A, b);
  if (res.status != qp::Status::Optimal) return std::nullopt;
  if (rows && (A * res.x - b).maxCoeff() > 1e-8) return std::nullopt;
  return res.x;
}

Outcome criterion1() {
  double worst = 0.0;
  int pairs = 0;
  for (const char* file : {"scalar.json", "double_integrator.json", "formation3.json"}) {
    const Problem p = load(file);
    std::mt19937_64 rng(101);
    const auto states = feasible_states(p, 100, 0.25, 17);
    for (const VectorXd& x : states) {
      const auto u = feasible_inputs(p.g, x, rng);
      if (!u) return {false, std::string("could not build a feasible input for ") + file};
      double sparse = 0.0;
      for (std::size_t i = 0; i < p.sh.scenario.agents.size(); ++i) {
        const auto& a = p.sh.scenario.agents[i];
        sparse += rollout_cost(a.A, a.B, a.Q, a.R, a.P, p.g.agent_state(x, i), p.g.agent_inputs(*u, i),
                               p.sh.scenario.horizon);
      }
      worst = std::max(worst, std::abs(eval_condensed_cost(p.g, *u, x) - sparse) / std::abs(sparse));
      ++pairs;
    }
  }
  return {pairs == 300 && worst <= 1e-9,
          std::to_string(pairs) + " pairs, max relative error " + sci(worst) + " <= 1e-9"};
}

Outcome criterion2() {
  const Problem p = load("formation3.json");
  const double eps = p.s.epsilon;
  const double alpha = default_step(lipschitz_constant(p.g, eps));
  const auto states = feasible_states(p, 10, 0.5, 23);
  double worst = -1e300;
  for (const auto& x : states) {
    const auto rep = analysis::suboptimality_curve(p.g, x, VectorXd::Zero(p.g.coupling_rows()), 500, eps, alpha);
    worst = std::max(worst, rep.checks.front().measured);
  }
  return {worst <= 1e-8, "10 states, l <= 500, alpha = 0.99/L = " + sci(alpha) + ", max(gap - bound) = " + sci(worst) +
                             " <= 1e-8"};
}

Outcome criterion3() {
  const Problem p = load("formation3.json");
  const double eps = p.s.epsilon;
  const double alpha = default_step(lipschitz_constant(p.g, eps));
  const auto o = solve_centralized(p.g, p.x0, eps);
  AdaOptions opts;
  opts.record_diagnostics = false;
  const auto run = run_ada(VectorXd::Zero(p.g.coupling_rows()), p.x0, 10000, p.g, eps, alpha, opts);
  const double dual_err = (run.lambda - o.lambda_star).norm() / o.lambda_star.norm();
  const VectorXd q = recover_inputs(p.g, p.x0, run.lambda);
  const VectorXd kappa = regularized_feedback(p.g, p.x0, eps);
  const double q_err = (q - kappa).norm() / kappa.norm();
  return {o.lambda_star.norm() > 0.0 && dual_err <= 1e-5 && q_err <= 1e-5,
          "|S| = " + sci(o.lambda_star.norm()) + ", dual rel error " + sci(dual_err) + ", input rel error " +
              sci(q_err) + " (<= 1e-5)"};
}

Outcome criterion4() {
  const Problem p = load("desk2.json");
  const double alpha = 0.25, eps = 1.0;
  const double L = lipschitz_constant(p.g, eps);
  bool ok = alpha < 1.0 / L;
  std::string detail = "L = " + sci(L);
  for (int l : {4, 7, 15}) {
    analysis::ContractionOptions opts;
    opts.trials = 50;
    opts.seed = 40 + static_cast<std::uint64_t>(l);
    const auto rep = analysis::contraction_estimate(p.g, p.x0, l, eps, alpha, opts);
    ok = ok && !rep.checks.empty() && rep.passed();
    detail += "; l=" + std::to_string(l) + " eta_hat " + sci(rep.parameters["eta_hat"].get<double>()) + " (mu " +
              sci(rep.parameters["eta_hat_mu"].get<double>()) + ") <= " +
              sci(rep.parameters["eta_bound"].get<double>());
  }
  return {ok, detail};
}

// Closed loops shared by criteria 5 and 6.
struct Loops {
  Problem p;
  std::vector<analysis::SweepPoint> sweep;  // l = 1, 5, 20, 100, 500
  ClosedLoopTrace optimal;
};

const Loops& loops() {
  static const Loops L = [] {
    Loops l;
    l.p = load("formation3.json");
    l.sweep = analysis::iteration_sweep(l.p.s, {1, 5, 20, 100, 500}, 60);
    auto dist = make_disturbance("zero", VectorXd::Zero(l.p.s.total_states()), 0);
    const GlobalQP& g = l.p.g;
    l.optimal = simulate_policy(l.p.s, 60, [&](const VectorXd& x) { return optimal_feedback(g, x); }, dist);
    return l;
  }();
  return L;
}

Outcome criterion5() {
  const Loops& l = loops();
  const auto& one = l.sweep.front().trace;
  const auto& many = l.sweep.back().trace;
  const double fin = analysis::final_error(one);
  const double err = analysis::max_state_error(many, l.optimal);
  const bool ok = !one.truncated && !many.truncated && !l.optimal.truncated && one.steps() == 60 &&
                  many.steps() == 60 && fin <= 1e-2 && err <= 1e-3;
  return {ok, "l=1: |x_60 - target| = " + sci(fin) + " <= 1e-2; l=500 vs optimal MPC loop: max_t error " + sci(err) +
                  " <= 1e-3"};
}

Outcome criterion6() {
  const Loops& l = loops();
  const std::vector<analysis::SweepPoint> four(l.sweep.begin(), l.sweep.begin() + 4);
  const auto rep = analysis::violation_report(l.p.s, four, 1e-6);
  const double peak500 = analysis::peak_violation(l.sweep.back().trace);
  std::string detail = "peaks";
  for (const auto& pt : l.sweep) detail += " l=" + std::to_string(pt.iterations) + ":" + sci(analysis::peak_violation(pt.trace));
  detail += "; non-increasing over l<=100 (tol 1e-6): " + std::string(rep.passed() ? "yes" : "no") +
            "; l=500 peak <= 1e-4";
  return {rep.passed() && peak500 <= 1e-4, detail};
}

Outcome criterion7() {
  const Problem p = load("formation3.json");
  const auto states = feasible_states(p, 5, 0.4, 71, [&](const VectorXd& x) {
    return solve_centralized(p.g, x, 0.0).lambda_star.norm() > 1e-6;
  });
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  const auto rep = analysis::regularization_sweep(p.g, states, eps);
  const auto& slope = rep.checks[0];
  const auto& env = rep.checks[1];
  return {slope.passed, "5 active states, max fitted slope " + sci(slope.measured) + " <= 0.6; sqrt(eps) envelope ratio " +
                            sci(env.measured) + " <= 1.1 (" + (env.passed ? "holds" : "violated") + ")"};
}

Outcome criterion8() {
  const Problem p = load("formation3.json");
  const VectorXd off = p.sh.shift.stacked_state_offset();
  std::vector<VectorXd> starts;
  for (const auto& x : feasible_states(p, 10, 0.5, 83)) starts.push_back(x + off);
  const auto rep = analysis::lyapunov_decrease(p.s, starts, 30);
  const double beta = rep.parameters["beta_hat"].get<double>();
  return {rep.passed() && rep.flags.empty() && !rep.index.empty(),
          "10 trajectories, " + std::to_string(rep.index.size()) + " steps, beta_hat = " + sci(beta) + " < 1"};
}

Outcome criterion9() {
  const Problem p = load("formation3.json");
  const int threshold = analysis::stability_threshold(p.s, {1, 2, 5, 10, 20, 50, 100}, 60, 1e-3);
  if (threshold < 0) return {false, "no stable iteration count found"};
  analysis::IssOptions opts;
  opts.steps = 60;
  opts.seeds = {1, 2, 3, 4, 5};
  const auto rep = analysis::iss_experiment(p.s, threshold, {0.0, 0.01, 0.05}, opts);
  const auto& ub = rep.series.at("ultimate_bound");
  std::string detail = "l = " + std::to_string(threshold) + " (empirical threshold); trailing-half max |x|:";
  for (std::size_t k = 0; k < ub.size(); ++k) detail += " beta=" + sci(rep.index[k]) + ":" + sci(ub[k]);
  detail += "; finite, monotone, <= 1e-3 at beta=0";
  for (const auto& f : rep.flags) detail += "; " + f;
  return {rep.passed(), detail};
}

std::string read_body(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string s = ss.str();
  const auto nl = s.find('\n');
  return nl == std::string::npos ? std::string() : s.substr(nl + 1);
}

Outcome criterion10() {
  if (cli_path.empty()) return {false, "CLI path not given"};
  const fs::path root = fs::temp_directory_path() / ("tdmpc_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> bodies;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    const std::string cmd = "\"" + cli_path + "\" simulate --quiet --scenario \"" + scenario_file("formation3.json") +
                            "\" --iters 1 --steps 60 --seed 3 --disturbance uniform --out \"" + dir.string() + "\"";
    if (std::system(cmd.c_str()) != 0) return {false, "simulate exited nonzero"};
    std::vector<fs::path> csv;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".csv") csv.push_back(e.path());
    if (csv.size() != 1) return {false, "expected one trace CSV"};
    bodies.push_back(read_body(csv.front()));
  }
  fs::remove_all(root);
  const bool same = !bodies[0].empty() && bodies[0] == bodies[1];
  return {same, std::to_string(bodies[0].size()) + "-byte trace bodies " + (same ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "condensation equivalence", 5, criterion1},
    {2, "dual gap bound", 120, criterion2},
    {3, "oracle equivalence", 60, criterion3},
    {4, "contraction factor", 60, criterion4},
    {5, "formation closed loop", 120, criterion5},
    {6, "coupling violation ordering", 180, criterion6},
    {7, "regularization scaling", 120, criterion7},
    {8, "Lyapunov decrease", 60, criterion8},
    {9, "input-to-state stability", 180, criterion9},
    {10, "determinism", 60, criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      cli_path = a;
    }
  }
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (only && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool ok = out.passed && in_time;
    failed += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << out.detail << " ["
              << std::fixed << std::setprecision(2) << secs << " s < " << std::setprecision(0) << c.limit_seconds
              << " s" << (in_time ? "" : ", too slow") << "]" << std::defaultfloat << std::endl;
  }
  return failed;
}
