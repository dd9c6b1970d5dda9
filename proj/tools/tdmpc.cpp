// Command-line driver: check, solve, simulate, sweep, dump.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tdmpc/analysis.hpp"
#include "tdmpc/condense.hpp"
#include "tdmpc/coordinator.hpp"
#include "tdmpc/errors.hpp"
#include "tdmpc/io.hpp"
#include "tdmpc/oracle.hpp"
#include "tdmpc/plant.hpp"

namespace fs = std::filesystem;
using namespace tdmpc;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitScenario = 3;
constexpr int kExitSolver = 4;

struct RunConfig {
  std::string scenario;
  std::string out = ".";
  std::vector<int> iters;
  std::vector<double> eps;
  std::optional<double> alpha;
  std::optional<int> steps;
  std::vector<std::uint64_t> seeds;
  std::string disturbance = "zero";
  double dist_scale = 1.0;
  int jobs = 1;
  int samples = 100;
  double tol_kkt = 1e-9;
  double tol_inner = 1e-9;
  double tol_feas = 1e-8;
  double tol_violation = 1e-6;
  double tol_condense = 1e-9;
  bool quiet = false;
};

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--scenario", cfg.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", cfg.out, "output directory (created if absent)")->capture_default_str();
  sub->add_option("--iters", cfg.iters, "iterations per sampling period; sweep accepts a list")->delimiter(',');
  sub->add_option("--eps", cfg.eps, "regularization epsilon; sweep accepts a list")->delimiter(',');
  sub->add_option("--alpha", cfg.alpha, "step size (default 0.99/L)");
  sub->add_option("--steps", cfg.steps, "closed-loop steps");
  sub->add_option("--seed", cfg.seeds, "random seed; sweep accepts a list")->delimiter(',');
  sub->add_option("--jobs", cfg.jobs, "parallel grid points (sweep)")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--disturbance", cfg.disturbance, "zero | uniform | constant-worst")->capture_default_str();
  sub->add_option("--dist-scale", cfg.dist_scale, "multiplier on the scenario disturbance bound")->capture_default_str();
  sub->add_option("--tol-kkt", cfg.tol_kkt, "oracle KKT tolerance")->capture_default_str();
  sub->add_option("--tol-inner", cfg.tol_inner, "local QP KKT tolerance")->capture_default_str();
  sub->add_option("--tol-feas", cfg.tol_feas, "local feasibility tolerance")->capture_default_str();
  sub->add_option("--tol-violation", cfg.tol_violation, "sweep monotonicity tolerance")->capture_default_str();
  sub->add_option("--tol-condense", cfg.tol_condense, "condensation self-test tolerance")->capture_default_str();
  sub->add_option("--samples", cfg.samples, "condensation self-test samples")->capture_default_str();
  sub->add_flag("-q,--quiet", cfg.quiet, "suppress the summary on stdout");
}

Scenario load(const RunConfig& cfg) {
  Scenario s = load_scenario(cfg.scenario);
  if (!cfg.eps.empty()) s.epsilon = cfg.eps.front();
  if (cfg.alpha) s.alpha = *cfg.alpha;
  if (cfg.steps) s.sim_steps = *cfg.steps;
  if (!cfg.iters.empty()) s.iterations = cfg.iters.front();
  if (!cfg.seeds.empty()) s.seed = cfg.seeds.front();
  if (s.epsilon <= 0.0) throw ValueError("epsilon must be positive");
  if (s.iterations < 0) throw ValueError("iterations must be non-negative");
  if (s.alpha && *s.alpha <= 0.0) throw ValueError("alpha must be positive");
  return s;
}

LocalQpOptions local_options(const RunConfig& cfg) {
  LocalQpOptions o;
  o.inner_tol = cfg.tol_inner;
  o.feas_tol = cfg.tol_feas;
  return o;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path p(cfg.out);
  fs::create_directories(p);
  return p;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string point_tag(const Scenario& s, int iters, double eps, std::uint64_t seed) {
  return s.hash + "_l" + std::to_string(iters) + "_e" + fmt(eps) + "_s" + std::to_string(seed);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

void write_report(const fs::path& dir, const std::string& stem, const analysis::ExperimentReport& rep) {
  write_text(dir / (stem + ".json"), rep.to_json().dump(2) + "\n");
  std::ostringstream csv;
  rep.write_csv(csv);
  write_text(dir / (stem + ".csv"), csv.str());
}

void print_checks(const analysis::ExperimentReport& rep) {
  for (const auto& c : rep.checks) {
    std::cout << "  " << (c.passed ? "ok   " : "FAIL ") << c.name << " = " << c.measured << ' ' << c.relation << ' '
              << c.limit << '\n';
  }
  for (const auto& f : rep.flags) std::cout << "  note " << f << '\n';
}

int cmd_check(const RunConfig& cfg) {
  const Scenario s = load(cfg);
  const auto rep = validate_assumptions(s);
  const auto self = analysis::condensation_self_test(s, cfg.samples, s.seed, cfg.tol_condense);
  const ShiftedScenario sh = shift_to_target(s);
  const GlobalQP g = build_global_qp(sh.scenario);
  const double L = lipschitz_constant(g, s.epsilon);
  const double alpha = s.alpha.value_or(default_step(L));
  if (!cfg.quiet) {
    std::cout << "scenario " << s.name << " (" << s.hash << "): " << s.agents.size() << " agents, horizon "
              << s.horizon << ", " << g.coupling_rows() << " coupling rows\n";
    std::cout << rep.summary();
    std::cout << "condensation self-test (" << cfg.samples << " samples)\n";
    print_checks(self);
    std::cout << "lipschitz " << L << " (aggregate " << lipschitz_constant_aggregate(g, s.epsilon) << "), alpha "
              << alpha << ", min_iterations " << min_iterations(alpha, s.epsilon) << '\n';
  }
  if (!rep.passed()) throw ValueError("standing assumptions violated: " + rep.summary());
  if (!self.passed()) throw NoConvergence("condensation self-test failed");
  return 0;
}

int cmd_solve(const RunConfig& cfg) {
  Scenario s = load(cfg);
  if (cfg.iters.empty()) s.iterations = 500;
  if (s.iterations < 1) throw ValueError("solve needs at least one iteration");
  const ShiftedScenario sh = shift_to_target(s);
  const GlobalQP g = build_global_qp(sh.scenario);
  const double alpha = s.alpha.value_or(default_step(lipschitz_constant(g, s.epsilon)));
  const VectorXd x = sh.scenario.stacked_initial_state();
  OracleOptions oracle;
  oracle.kkt_tol = cfg.tol_kkt;
  const auto rep =
      analysis::suboptimality_curve(g, x, VectorXd::Zero(g.coupling_rows()), s.iterations, s.epsilon, alpha, 1e-8, oracle);
  AdaOptions opts;
  opts.local = local_options(cfg);
  opts.record_diagnostics = false;
  const AdaRun run = run_ada(VectorXd::Zero(g.coupling_rows()), x, s.iterations, g, s.epsilon, alpha, opts);
  const VectorXd u = recover_inputs(g, x, run.lambda, opts.local) + sh.shift.stacked_input_offset();
  const fs::path dir = out_dir(cfg);
  const std::string stem = "solve_" + point_tag(s, s.iterations, s.epsilon, s.seed);
  write_report(dir, stem, rep);
  if (!cfg.quiet) {
    std::cout << "solve l=" << s.iterations << " eps=" << s.epsilon << " alpha=" << alpha << '\n';
    std::cout << "  final gap " << rep.series.at("gap").back() << ", |lambda - S| "
              << rep.series.at("lambda_error").back() << '\n';
    std::cout << "  first inputs " << u.transpose() << '\n';
    print_checks(rep);
    std::cout << "  wrote " << (dir / (stem + ".json")).string() << '\n';
  }
  return 0;
}

ClosedLoopTrace run_point(const Scenario& s, const RunConfig& cfg) {
  SimOptions opts = sim_options_from(s);
  opts.local = local_options(cfg);
  auto dist = DisturbanceSource(parse_disturbance_kind(cfg.disturbance), scenario_disturbance_bound(s, cfg.dist_scale),
                                s.seed);
  return simulate_closed_loop(s, opts, dist);
}

void write_trace(const fs::path& dir, const std::string& stem, const Scenario& s, const ClosedLoopTrace& tr) {
  std::ostringstream csv;
  write_trace_csv(csv, tr, s.agents);
  write_text(dir / (stem + ".csv"), csv.str());
  write_text(dir / (stem + ".json"), trace_metadata(tr).dump(2) + "\n");
}

int cmd_simulate(const RunConfig& cfg) {
  const Scenario s = load(cfg);
  parse_disturbance_kind(cfg.disturbance);
  const fs::path dir = out_dir(cfg);
  const ClosedLoopTrace tr = run_point(s, cfg);
  const std::string stem = "trace_" + point_tag(s, s.iterations, s.epsilon, s.seed);
  write_trace(dir, stem, s, tr);
  if (!cfg.quiet) {
    std::cout << "simulate l=" << s.iterations << " eps=" << s.epsilon << " steps=" << tr.steps() << '\n';
    std::cout << "  final |x - target| " << analysis::final_error(tr) << ", peak violation "
              << analysis::peak_violation(tr) << '\n';
    std::cout << "  wrote " << (dir / (stem + ".csv")).string() << '\n';
  }
  if (tr.truncated) throw Infeasible("closed loop left the feasible region at t=" + std::to_string(tr.infeasible_step) +
                                     ": " + tr.failure);
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const Scenario base = load(cfg);
  parse_disturbance_kind(cfg.disturbance);
  const std::vector<int> iters = cfg.iters.empty() ? std::vector<int>{base.iterations} : cfg.iters;
  const std::vector<double> eps = cfg.eps.empty() ? std::vector<double>{base.epsilon} : cfg.eps;
  const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : cfg.seeds;
  for (double e : eps)
    if (e <= 0.0) throw ValueError("epsilon must be positive");

  struct Point {
    int iters;
    double eps;
    std::uint64_t seed;
    ClosedLoopTrace trace;
  };
  std::vector<Point> grid;
  for (double e : eps)
    for (std::uint64_t sd : seeds)
      for (int l : iters) grid.push_back({l, e, sd, {}});

  const fs::path dir = out_dir(cfg);
  analysis::parallel_for(static_cast<int>(grid.size()), cfg.jobs, [&](int k) {
    Point& p = grid[static_cast<std::size_t>(k)];
    Scenario s = base;
    s.iterations = p.iters;
    s.epsilon = p.eps;
    s.seed = p.seed;
    p.trace = run_point(s, cfg);
    write_trace(dir, "trace_" + point_tag(s, p.iters, p.eps, p.seed), s, p.trace);
  });

  bool ok = true;
  for (double e : eps) {
    for (std::uint64_t sd : seeds) {
      std::vector<analysis::SweepPoint> sweep;
      for (const auto& p : grid)
        if (p.eps == e && p.seed == sd) sweep.push_back({p.iters, p.trace});
      Scenario s = base;
      s.epsilon = e;
      auto rep = analysis::violation_report(s, sweep, cfg.tol_violation);
      rep.parameters["seed"] = sd;
      rep.parameters["disturbance"] = cfg.disturbance;
      const std::string stem = "violation_" + base.hash + "_e" + fmt(e) + "_s" + std::to_string(sd);
      write_report(dir, stem, rep);
      ok = ok && rep.passed();
      if (!cfg.quiet) {
        std::cout << "sweep eps=" << e << " seed=" << sd << '\n';
        for (std::size_t k = 0; k < sweep.size(); ++k) {
          std::cout << "  l=" << sweep[k].iterations << " peak violation " << rep.series.at("peak_violation")[k]
                    << " final error " << rep.series.at("final_error")[k] << '\n';
        }
        print_checks(rep);
      }
    }
  }
  if (!cfg.quiet) std::cout << "  wrote " << grid.size() << " traces to " << dir.string() << '\n';
  if (!cfg.quiet && !ok) std::cout << "  violation ordering check failed (recorded in the report)\n";
  return 0;
}

int cmd_dump(const RunConfig& cfg) {
  const Scenario s = load(cfg);
  const ShiftedScenario sh = shift_to_target(s);
  const GlobalQP g = build_global_qp(sh.scenario);
  json doc = condensed_to_json(g);
  doc["scenario_hash"] = s.hash;
  doc["lipschitz"] = lipschitz_constant(g, s.epsilon);
  const fs::path dir = out_dir(cfg);
  const fs::path file = dir / ("condensed_" + s.hash + ".json");
  write_text(file, doc.dump(1) + "\n");
  if (!cfg.quiet) std::cout << "wrote " << file.string() << '\n';
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(int code, const std::string& name, const std::string& what) {
  std::cerr << "tdmpc: error=" << name << " exit=" << code << " message=\"" << one_line(what) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-distributed dual MPC for coupled linear agents"};
  app.require_subcommand(1, 1);
  RunConfig cfg;
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Sub subs[] = {
      {"check", "validate assumptions and self-test the condensation", cmd_check},
      {"solve", "one-shot dual ascent at the initial state with a suboptimality curve", cmd_solve},
      {"simulate", "closed loop; writes trace CSV and metadata JSON", cmd_simulate},
      {"sweep", "grid over --iters, --eps and --seed; writes traces and violation reports", cmd_sweep},
      {"dump", "write the condensed matrices as JSON", cmd_dump},
  };
  std::vector<std::pair<CLI::App*, int (*)(const RunConfig&)>> handlers;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, cfg);
    handlers.emplace_back(sub, s.fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return fail(kExitUsage, "UsageError", e.what());
  }

  try {
    for (auto& [sub, fn] : handlers)
      if (sub->parsed()) return fn(cfg);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Usage: return fail(kExitUsage, e.name(), e.what());
      case ErrorKind::Scenario: return fail(kExitScenario, e.name(), e.what());
      case ErrorKind::Solver: return fail(kExitSolver, e.name(), e.what());
    }
  } catch (const json::exception& e) {
    return fail(kExitScenario, "ParseError", e.what());
  } catch (const std::exception& e) {
    return fail(1, "IOError", e.what());
  }
  return 0;
}
