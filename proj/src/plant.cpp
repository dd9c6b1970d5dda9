#include "tdmpc/plant.hpp"

#include <chrono>
#include <iomanip>
#include <ostream>

#include "tdmpc/errors.hpp"
#include "tdmpc/localqp.hpp"

namespace tdmpc {

VectorXd plant_step(const VectorXd& x, const VectorXd& u, const VectorXd& d, const std::vector<AgentModel>& models) {
  Eigen::Index n = 0, m = 0;
  for (const auto& a : models) {
    n += a.n();
    m += a.m();
  }
  if (x.size() != n || d.size() != n || u.size() != m) throw DimensionError("plant_step: stacked sizes do not match");
  VectorXd next(n);
  Eigen::Index xo = 0, uo = 0;
  for (const auto& a : models) {
    next.segment(xo, a.n()) = a.A * x.segment(xo, a.n()) + a.B * u.segment(uo, a.m()) + d.segment(xo, a.n());
    xo += a.n();
    uo += a.m();
  }
  return next;
}

DisturbanceKind parse_disturbance_kind(const std::string& kind) {
  if (kind == "zero") return DisturbanceKind::Zero;
  if (kind == "uniform") return DisturbanceKind::Uniform;
  if (kind == "constant" || kind == "constant-worst") return DisturbanceKind::ConstantWorst;
  throw UnknownKind("unknown disturbance kind '" + kind + "' (expected zero, uniform, constant-worst)");
}

std::string to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::Zero: return "zero";
    case DisturbanceKind::Uniform: return "uniform";
    case DisturbanceKind::ConstantWorst: return "constant-worst";
  }
  return "zero";
}

DisturbanceSource::DisturbanceSource(DisturbanceKind kind, VectorXd bound, std::uint64_t seed, VectorXd vertex)
    : kind_(kind), bound_(std::move(bound)), vertex_(std::move(vertex)), rng_(seed) {
  if ((bound_.array() < 0.0).any()) throw ValueError("disturbance bound must be >= 0");
  if (vertex_.size() == 0) vertex_ = VectorXd::Ones(bound_.size());
  if (vertex_.size() != bound_.size()) throw DimensionError("disturbance vertex has wrong size");
}

VectorXd DisturbanceSource::next() {
  switch (kind_) {
    case DisturbanceKind::Zero:
      return VectorXd::Zero(bound_.size());
    case DisturbanceKind::ConstantWorst:
      return vertex_.cwiseSign().cwiseProduct(bound_);
    case DisturbanceKind::Uniform: {
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      VectorXd d(bound_.size());
      for (Eigen::Index k = 0; k < d.size(); ++k) d(k) = bound_(k) * unit(rng_);
      return d;
    }
  }
  return VectorXd::Zero(bound_.size());
}

DisturbanceSource make_disturbance(const std::string& kind, const VectorXd& bound, std::uint64_t seed) {
  return DisturbanceSource(parse_disturbance_kind(kind), bound, seed);
}

VectorXd scenario_disturbance_bound(const Scenario& s, double scale) {
  VectorXd b(s.total_states());
  Eigen::Index off = 0;
  for (const auto& a : s.agents) {
    b.segment(off, a.n()) = scale * a.disturbance_bound;
    off += a.n();
  }
  return b;
}

VectorXd stage_violation(const CouplingSpec::Stacked& coupling, const std::vector<AgentModel>& models,
                         const VectorXd& x, const VectorXd& u) {
  VectorXd lhs = -coupling.b;
  Eigen::Index xo = 0, uo = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    lhs += coupling.Ex[i] * x.segment(xo, models[i].n());
    if (u.size() > 0) lhs += coupling.Eu[i] * u.segment(uo, models[i].m());
    xo += models[i].n();
    uo += models[i].m();
  }
  return lhs.cwiseMax(0.0);
}

SimOptions sim_options_from(const Scenario& s) {
  SimOptions o;
  o.iterations = s.iterations;
  o.steps = s.sim_steps;
  o.epsilon = s.epsilon;
  o.alpha = s.alpha;
  return o;
}

namespace {

ClosedLoopTrace start_trace(const Scenario& s, const ShiftedScenario& shifted, DisturbanceSource& dist) {
  ClosedLoopTrace tr;
  tr.shift = shifted.shift;
  tr.seed = s.seed;
  tr.scenario_hash = s.hash;
  tr.scenario_name = s.name;
  tr.disturbance = to_string(dist.kind());
  tr.x.push_back(shifted.scenario.stacked_initial_state());
  return tr;
}

}  // namespace

ClosedLoopTrace simulate_closed_loop(const Scenario& s, const SimOptions& opts, DisturbanceSource& dist) {
  if (opts.iterations < 0) throw ValueError("simulate_closed_loop: iterations must be >= 0");
  if (opts.steps < 0) throw ValueError("simulate_closed_loop: steps must be >= 0");
  const ShiftedScenario shifted = shift_to_target(s);
  const Scenario& es = shifted.scenario;
  const GlobalQP g = build_global_qp(es);
  const auto coupling = es.coupling.stacked(es.agents);

  ClosedLoopTrace tr = start_trace(s, shifted, dist);
  tr.iterations = opts.iterations;
  tr.epsilon = opts.epsilon;
  tr.alpha = opts.alpha ? *opts.alpha : default_step(lipschitz_constant(g, opts.epsilon));

  VectorXd lambda = opts.lambda0 ? *opts.lambda0 : VectorXd::Zero(g.coupling_rows());
  if (lambda.size() != g.coupling_rows()) throw DimensionError("simulate_closed_loop: lambda0 has wrong size");

  AdaOptions ada;
  ada.local = opts.local;
  ada.record_diagnostics = opts.record_diagnostics;

  for (int t = 0; t < opts.steps; ++t) {
    const VectorXd& x = tr.x.back();
    const auto t0 = std::chrono::steady_clock::now();
    VectorXd u;
    try {
      AdaRun run = run_ada(lambda, x, opts.iterations, g, opts.epsilon, tr.alpha, ada);
      lambda = run.lambda;
      u = recover_inputs(g, x, lambda, opts.local);
      if (opts.record_diagnostics) tr.diagnostics.push_back(std::move(run.diagnostics));
    } catch (const Infeasible& e) {
      tr.truncated = true;
      tr.infeasible_step = t;
      tr.failure = std::string("InfeasibleAtStep(") + std::to_string(t) + "): " + e.what();
      break;
    } catch (const MaxIters& e) {
      tr.truncated = true;
      tr.infeasible_step = t;
      tr.failure = std::string("MaxIters at step ") + std::to_string(t) + ": " + e.what();
      break;
    }
    const VectorXd d = dist.next();
    tr.wall_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    tr.violation.push_back(stage_violation(coupling, es.agents, x, u));
    tr.lambda.push_back(lambda);
    tr.u.push_back(u);
    tr.d.push_back(d);
    tr.x.push_back(plant_step(x, u, d, es.agents));
  }
  return tr;
}

ClosedLoopTrace simulate_policy(const Scenario& s, int steps, const std::function<VectorXd(const VectorXd&)>& policy,
                                DisturbanceSource& dist) {
  const ShiftedScenario shifted = shift_to_target(s);
  const Scenario& es = shifted.scenario;
  const auto coupling = es.coupling.stacked(es.agents);
  ClosedLoopTrace tr = start_trace(s, shifted, dist);
  for (int t = 0; t < steps; ++t) {
    const VectorXd& x = tr.x.back();
    const auto t0 = std::chrono::steady_clock::now();
    VectorXd u;
    try {
      u = policy(x);
    } catch (const Infeasible& e) {
      tr.truncated = true;
      tr.infeasible_step = t;
      tr.failure = std::string("InfeasibleAtStep(") + std::to_string(t) + "): " + e.what();
      break;
    }
    const VectorXd d = dist.next();
    tr.wall_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    tr.violation.push_back(stage_violation(coupling, es.agents, x, u));
    tr.u.push_back(u);
    tr.d.push_back(d);
    tr.x.push_back(plant_step(x, u, d, es.agents));
  }
  return tr;
}

void write_trace_csv(std::ostream& os, const ClosedLoopTrace& tr, const std::vector<AgentModel>& models) {
  const VectorXd xoff = tr.shift.stacked_state_offset();
  const VectorXd uoff = tr.shift.stacked_input_offset();
  const Eigen::Index rows = tr.violation.empty() ? 0 : tr.violation.front().size();
  os << "# tdmpc-trace v1\n";
  os << "t";
  for (std::size_t i = 0; i < models.size(); ++i)
    for (Eigen::Index k = 0; k < models[i].n(); ++k) os << ",x" << i << '_' << k;
  for (std::size_t i = 0; i < models.size(); ++i)
    for (Eigen::Index k = 0; k < models[i].m(); ++k) os << ",u" << i << '_' << k;
  for (std::size_t i = 0; i < models.size(); ++i)
    for (Eigen::Index k = 0; k < models[i].n(); ++k) os << ",d" << i << '_' << k;
  for (Eigen::Index r = 0; r < rows; ++r) os << ",viol" << r;
  os << ",max_violation,dual_norm\n";
  os << std::setprecision(17);
  const std::size_t T = tr.u.size();
  for (std::size_t t = 0; t < tr.x.size(); ++t) {
    os << t;
    const VectorXd x = tr.x[t] + xoff;
    for (Eigen::Index k = 0; k < x.size(); ++k) os << ',' << x(k);
    if (t < T) {
      const VectorXd u = tr.u[t] + uoff;
      for (Eigen::Index k = 0; k < u.size(); ++k) os << ',' << u(k);
      for (Eigen::Index k = 0; k < tr.d[t].size(); ++k) os << ',' << tr.d[t](k);
      for (Eigen::Index r = 0; r < rows; ++r) os << ',' << tr.violation[t](r);
      os << ',' << (rows ? tr.violation[t].maxCoeff() : 0.0);
      os << ',' << (t < tr.lambda.size() ? tr.lambda[t].norm() : 0.0);
    } else {
      const Eigen::Index blanks = uoff.size() + xoff.size() + rows + 2;
      for (Eigen::Index k = 0; k < blanks; ++k) os << ',';
    }
    os << '\n';
  }
}

json trace_metadata(const ClosedLoopTrace& tr) {
  double wall = 0.0;
  for (double w : tr.wall_seconds) wall += w;
  json meta;
  meta["format"] = "tdmpc-trace v1";
  meta["scenario"] = tr.scenario_name;
  meta["scenario_hash"] = tr.scenario_hash;
  meta["iterations"] = tr.iterations;
  meta["epsilon"] = tr.epsilon;
  meta["alpha"] = tr.alpha;
  meta["seed"] = tr.seed;
  meta["disturbance"] = tr.disturbance;
  meta["steps"] = tr.steps();
  meta["truncated"] = tr.truncated;
  meta["infeasible_step"] = tr.infeasible_step;
  meta["failure"] = tr.failure;
  meta["wall_seconds_total"] = wall;
  return meta;
}

}  // namespace tdmpc
