#include "tdmpc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "tdmpc/coordinator.hpp"
#include "tdmpc/errors.hpp"
#include "tdmpc/oracle.hpp"

namespace tdmpc::analysis {

Check check_le(std::string name, double measured, double limit) {
  return {std::move(name), measured, limit, "<=", measured <= limit};
}

Check check_lt(std::string name, double measured, double limit) {
  return {std::move(name), measured, limit, "<", measured < limit};
}

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

// JSON has no inf/nan; keep them readable instead of null.
json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

json ExperimentReport::to_json() const {
  json j;
  j["id"] = id;
  j["parameters"] = parameters;
  j["scenario_hash"] = scenario_hash;
  j["passed"] = passed();
  j["checks"] = json::array();
  for (const auto& c : checks) {
    j["checks"].push_back(
        {{"name", c.name}, {"measured", number(c.measured)}, {"relation", c.relation}, {"limit", number(c.limit)},
         {"passed", c.passed}});
  }
  j["flags"] = flags;
  json s = json::object();
  s["index"] = json::array();
  for (double v : index) s["index"].push_back(number(v));
  for (const auto& [name, vals] : series) {
    s[name] = json::array();
    for (double v : vals) s[name].push_back(number(v));
  }
  j["series"] = s;
  return j;
}

void ExperimentReport::write_csv(std::ostream& os) const {
  os << "# tdmpc-report v1 " << id << "\n";
  os << "index";
  for (const auto& kv : series) os << ',' << kv.first;
  os << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < index.size(); ++r) {
    os << index[r];
    for (const auto& kv : series) {
      os << ',';
      if (r < kv.second.size()) os << kv.second[r];
    }
    os << '\n';
  }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ExperimentReport suboptimality_curve(const GlobalQP& g, const VectorXd& x, const VectorXd& lambda0, int iters,
                                     double epsilon, double alpha, double slack, const OracleOptions& oracle) {
  ExperimentReport rep;
  rep.id = "suboptimality";
  rep.parameters = {{"iterations", iters}, {"epsilon", epsilon}, {"alpha", alpha}};
  const OracleSolution o = solve_centralized(g, x, epsilon, oracle);
  const double psi_star = dual_cost(o.lambda_star, x, g, epsilon);
  const double dist2 = (lambda0 - o.lambda_star).squaredNorm();

  AdaOptions opts;
  opts.record_dual_cost = true;
  const AdaRun run = run_ada(lambda0, x, iters, g, epsilon, alpha, opts);

  auto& gap = rep.series["gap"];
  auto& bound = rep.series["bound"];
  auto& lam_err = rep.series["lambda_error"];
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& it : run.diagnostics) {
    const double l = it.j + 1.0;
    rep.index.push_back(l);
    gap.push_back(it.dual_cost - psi_star);
    bound.push_back(2.0 * dist2 / (alpha * (l + 1.0) * (l + 1.0)));
    worst = std::max(worst, gap.back() - bound.back());
  }
  lam_err.assign(rep.index.size(), std::numeric_limits<double>::quiet_NaN());
  if (!lam_err.empty()) lam_err.back() = (run.lambda - o.lambda_star).norm();
  rep.checks.push_back(check_le("max(gap - bound)", iters > 0 ? worst : 0.0, slack));

  // Upper envelope of the gap from the right, fitted where it is above round-off.
  std::vector<double> env(gap.size());
  double running = 0.0;
  for (std::size_t k = gap.size(); k-- > 0;) env[k] = running = std::max(running, gap[k]);
  const double floor = 1e-12 * (1.0 + std::abs(psi_star));
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < env.size(); ++k) {
    if (rep.index[k] >= 10 && env[k] > floor) {
      lx.push_back(rep.index[k]);
      ly.push_back(env[k]);
    }
  }
  rep.series["envelope"] = env;
  if (lx.size() >= 10 && lx.back() / lx.front() >= 4.0) {
    rep.checks.push_back(check_le("envelope log-log slope", loglog_slope(lx, ly), -2.0 + 0.2));
  } else {
    rep.flags.push_back("envelope slope not fitted: gap reaches round-off before l = 40");
  }
  return rep;
}

ExperimentReport contraction_estimate(const GlobalQP& g, const VectorXd& x, int iters, double epsilon, double alpha,
                                      const ContractionOptions& opts) {
  ExperimentReport rep;
  rep.id = "contraction";
  rep.parameters = {{"iterations", iters}, {"epsilon", epsilon}, {"alpha", alpha}, {"trials", opts.trials},
                    {"seed", opts.seed}};
  const double eta = contraction_factor(alpha, epsilon, iters);
  rep.parameters["eta_bound"] = eta;
  if (iters < min_iterations(alpha, epsilon)) {
    rep.flags.push_back("skipped: l below min_iterations, eta(l) >= 1");
    return rep;
  }
  const OracleSolution o = solve_centralized(g, x, epsilon);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> nd;
  AdaOptions ada;
  ada.record_diagnostics = false;
  auto& ratio = rep.series["ratio_lambda"];
  auto& ratio_mu = rep.series["ratio_mu"];
  for (int k = 0; k < opts.trials; ++k) {
    VectorXd start(g.coupling_rows());
    for (Eigen::Index r = 0; r < start.size(); ++r) start(r) = o.lambda_star(r) + opts.start_scale * nd(rng);
    start = start.cwiseMax(0.0);
    const double d0 = (start - o.lambda_star).norm();
    if (d0 == 0.0) continue;
    const AdaRun run = run_ada(start, x, iters, g, epsilon, alpha, ada);
    rep.index.push_back(k);
    ratio.push_back((run.lambda - o.lambda_star).norm() / d0);
    ratio_mu.push_back((run.mu - o.lambda_star).norm() / d0);
  }
  const double eta_hat = ratio.empty() ? 0.0 : *std::max_element(ratio.begin(), ratio.end());
  const double eta_hat_mu = ratio_mu.empty() ? 0.0 : *std::max_element(ratio_mu.begin(), ratio_mu.end());
  rep.parameters["eta_hat"] = eta_hat;
  rep.parameters["eta_hat_mu"] = eta_hat_mu;
  rep.checks.push_back(check_le("eta_hat", eta_hat, eta + opts.slack));
  return rep;
}

std::vector<double> violation_profile(const ClosedLoopTrace& trace) {
  std::vector<double> out;
  out.reserve(trace.violation.size());
  for (const auto& v : trace.violation) out.push_back(v.size() ? v.maxCoeff() : 0.0);
  return out;
}

double peak_violation(const ClosedLoopTrace& trace) {
  double peak = 0.0;
  for (double v : violation_profile(trace)) peak = std::max(peak, v);
  return peak;
}

double max_state_error(const ClosedLoopTrace& a, const ClosedLoopTrace& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < std::min(a.x.size(), b.x.size()); ++t) worst = std::max(worst, (a.x[t] - b.x[t]).norm());
  return worst;
}

double final_error(const ClosedLoopTrace& trace) {
  return trace.x.empty() ? std::numeric_limits<double>::infinity() : trace.x.back().norm();
}

std::vector<SweepPoint> iteration_sweep(const Scenario& s, const std::vector<int>& iters, int steps, int jobs) {
  std::vector<SweepPoint> out(iters.size());
  const VectorXd zero = VectorXd::Zero(s.total_states());
  parallel_for(static_cast<int>(iters.size()), jobs, [&](int k) {
    SimOptions opts = sim_options_from(s);
    opts.iterations = iters[static_cast<std::size_t>(k)];
    opts.steps = steps;
    auto dist = make_disturbance("zero", zero, s.seed);
    out[static_cast<std::size_t>(k)] = {opts.iterations, simulate_closed_loop(s, opts, dist)};
  });
  return out;
}

ExperimentReport violation_report(const Scenario& s, const std::vector<SweepPoint>& sweep, double tol) {
  ExperimentReport rep;
  rep.id = "violation";
  rep.scenario_hash = s.hash;
  rep.parameters = {{"epsilon", s.epsilon}, {"tolerance", tol}};
  auto& peak = rep.series["peak_violation"];
  auto& fin = rep.series["final_error"];
  for (const auto& p : sweep) {
    rep.index.push_back(p.iterations);
    peak.push_back(peak_violation(p.trace));
    fin.push_back(final_error(p.trace));
    if (p.trace.truncated) rep.flags.push_back("l=" + std::to_string(p.iterations) + " truncated: " + p.trace.failure);
  }
  double growth = 0.0;
  for (std::size_t k = 1; k < peak.size(); ++k) growth = std::max(growth, peak[k] - peak[k - 1]);
  rep.checks.push_back(check_le("max increase of peak violation", growth, tol));
  return rep;
}

int stability_threshold(const Scenario& s, const std::vector<int>& candidates, int steps, double tol) {
  std::vector<int> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  for (int l : sorted) {
    auto sweep = iteration_sweep(s, {l}, steps);
    const auto& tr = sweep.front().trace;
    if (!tr.truncated && final_error(tr) <= tol) return l;
  }
  return -1;
}

ExperimentReport regularization_sweep(const GlobalQP& g, const std::vector<VectorXd>& states,
                                      const std::vector<double>& eps_list, const RegularizationOptions& opts) {
  ExperimentReport rep;
  rep.id = "regularization";
  rep.parameters = {{"states", states.size()}, {"slope_limit", opts.slope_limit}, {"margin", opts.margin}};
  rep.index = eps_list;
  std::vector<double> eps_desc = eps_list;
  std::sort(eps_desc.rbegin(), eps_desc.rend());
  const int fit = std::min<int>(opts.fit_points, static_cast<int>(eps_desc.size()));
  const double fit_floor = fit > 0 ? eps_desc[static_cast<std::size_t>(fit - 1)] : 0.0;

  double worst_slope = -std::numeric_limits<double>::infinity();
  double worst_envelope = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const VectorXd& x = states[i];
    const double nx = x.norm();
    std::vector<double> r;
    if (nx == 0.0) {
      r.assign(eps_list.size(), 0.0);
    } else {
      const VectorXd kappa = optimal_feedback(g, x);
      for (double eps : eps_list) r.push_back((regularized_feedback(g, x, eps) - kappa).norm() / nx);
    }
    double C = 0.0;
    for (std::size_t k = 0; k < eps_list.size(); ++k)
      if (eps_list[k] >= fit_floor) C = std::max(C, r[k] / std::sqrt(eps_list[k]));
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
      if (eps_list[k] >= fit_floor || C == 0.0) continue;
      worst_envelope = std::max(worst_envelope, r[k] / (C * std::sqrt(eps_list[k])));
    }
    const double slope = loglog_slope(eps_list, r);
    rep.series["r_state" + std::to_string(i)] = r;
    rep.parameters["slope_state" + std::to_string(i)] = number(slope);
    rep.parameters["sqrt_constant_state" + std::to_string(i)] = C;
    if (std::isfinite(slope)) worst_slope = std::max(worst_slope, slope);
    else rep.flags.push_back("state " + std::to_string(i) + ": r vanishes, slope not fitted");
  }
  rep.checks.push_back(check_le("max fitted slope", worst_slope, opts.slope_limit));
  rep.checks.push_back(check_le("max r / (C sqrt(eps))", worst_envelope, 1.0 + opts.margin));
  return rep;
}

ExperimentReport lyapunov_decrease(const Scenario& s, const std::vector<VectorXd>& starts, int steps, double floor) {
  ExperimentReport rep;
  rep.id = "lyapunov";
  rep.scenario_hash = s.hash;
  rep.parameters = {{"trajectories", starts.size()}, {"steps", steps}, {"floor", floor}};
  const ShiftedScenario sh = shift_to_target(s);
  const GlobalQP g = build_global_qp(sh.scenario);
  auto& ratio = rep.series["phi_ratio"];
  auto& traj = rep.series["trajectory"];
  double beta = 0.0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    Scenario sk = s;
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < sk.agents.size(); ++i) {
      sk.initial_states[i] = starts[k].segment(off, sk.agents[i].n());
      off += sk.agents[i].n();
    }
    auto dist = make_disturbance("zero", VectorXd::Zero(s.total_states()), 0);
    const ClosedLoopTrace tr =
        simulate_policy(sk, steps, [&](const VectorXd& x) { return optimal_feedback(g, x); }, dist);
    if (tr.truncated) rep.flags.push_back("trajectory " + std::to_string(k) + " truncated: " + tr.failure);
    for (std::size_t t = 0; t + 1 < tr.x.size(); ++t) {
      if (tr.x[t].norm() <= floor) break;
      const double r = value_function(g, tr.x[t + 1]) / value_function(g, tr.x[t]);
      rep.index.push_back(static_cast<double>(rep.index.size()));
      ratio.push_back(r);
      traj.push_back(static_cast<double>(k));
      beta = std::max(beta, r);
    }
  }
  rep.parameters["beta_hat"] = beta;
  rep.checks.push_back(check_lt("beta_hat", beta, 1.0));
  return rep;
}

ExperimentReport iss_experiment(const Scenario& s, int iters, const std::vector<double>& bounds,
                                const IssOptions& opts) {
  ExperimentReport rep;
  rep.id = "iss";
  rep.scenario_hash = s.hash;
  rep.parameters = {{"iterations", iters}, {"steps", opts.steps}, {"seeds", opts.seeds}};
  const std::size_t nb = bounds.size(), ns = opts.seeds.size();
  std::vector<double> tail(nb * ns, 0.0);
  std::vector<std::string> failures(nb * ns);
  parallel_for(static_cast<int>(nb * ns), opts.jobs, [&](int idx) {
    const std::size_t b = static_cast<std::size_t>(idx) / ns, k = static_cast<std::size_t>(idx) % ns;
    SimOptions so = sim_options_from(s);
    so.iterations = iters;
    so.steps = opts.steps;
    auto dist = make_disturbance(bounds[b] > 0.0 ? "uniform" : "zero",
                                 VectorXd::Constant(s.total_states(), bounds[b]), opts.seeds[k]);
    const ClosedLoopTrace tr = simulate_closed_loop(s, so, dist);
    double m = 0.0;
    if (tr.truncated) {
      m = std::numeric_limits<double>::infinity();
      failures[static_cast<std::size_t>(idx)] = tr.failure;
    }
    for (std::size_t t = static_cast<std::size_t>(opts.steps) / 2 + 1; t < tr.x.size(); ++t) {
      const double nx = tr.x[t].norm();
      m = std::isfinite(nx) ? std::max(m, nx) : std::numeric_limits<double>::infinity();
    }
    tail[static_cast<std::size_t>(idx)] = m;
  });
  auto& ub = rep.series["ultimate_bound"];
  for (std::size_t b = 0; b < nb; ++b) {
    rep.index.push_back(bounds[b]);
    double m = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
      m = std::max(m, tail[b * ns + k]);
      rep.series["seed" + std::to_string(opts.seeds[k])].push_back(tail[b * ns + k]);
      if (!failures[b * ns + k].empty()) {
        rep.flags.push_back("beta=" + std::to_string(bounds[b]) + " seed=" + std::to_string(opts.seeds[k]) +
                            " truncated: " + failures[b * ns + k]);
      }
    }
    ub.push_back(m);
  }
  double worst = 0.0;
  bool finite = true;
  std::vector<std::size_t> order(nb);
  for (std::size_t b = 0; b < nb; ++b) order[b] = b;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return bounds[a] < bounds[c]; });
  for (std::size_t k = 0; k < nb; ++k) {
    finite = finite && std::isfinite(ub[order[k]]);
    if (k > 0) worst = std::max(worst, ub[order[k - 1]] - ub[order[k]]);
  }
  rep.checks.push_back(check_le("non-finite ultimate bounds", finite ? 0.0 : 1.0, 0.0));
  rep.checks.push_back(check_le("max decrease of ultimate bound in beta", worst, 0.0));
  for (std::size_t b = 0; b < nb; ++b)
    if (bounds[b] == 0.0) rep.checks.push_back(check_le("ultimate bound at beta = 0", ub[b], opts.nominal_limit));
  return rep;
}

ExperimentReport condensation_self_test(const Scenario& s, int samples, std::uint64_t seed, double tol) {
  ExperimentReport rep;
  rep.id = "condensation";
  rep.scenario_hash = s.hash;
  rep.parameters = {{"samples", samples}, {"seed", seed}, {"tolerance", tol}};
  const ShiftedScenario sh = shift_to_target(s);
  const GlobalQP g = build_global_qp(sh.scenario);
  const auto coupling = sh.scenario.coupling.stacked(sh.scenario.agents);
  const int N = sh.scenario.horizon;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  auto& cost_err = rep.series["cost_relative_error"];
  auto& row_err = rep.series["coupling_row_error"];
  for (int k = 0; k < samples; ++k) {
    VectorXd x(g.total_states()), u(g.total_inputs());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = ud(rng);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = ud(rng);
    double sparse = 0.0;
    VectorXd rows = VectorXd::Zero(g.coupling_rows());
    for (std::size_t i = 0; i < sh.scenario.agents.size(); ++i) {
      const AgentModel& a = sh.scenario.agents[i];
      const VectorXd ui = g.agent_inputs(u, i);
      VectorXd xi = g.agent_state(x, i);
      for (int t = 0; t < N; ++t) {
        const VectorXd nu = ui.segment(t * a.m(), a.m());
        sparse += 0.5 * (xi.dot(a.Q * xi) + nu.dot(a.R * nu));
        xi = a.A * xi + a.B * nu;
        if (g.stage_rows > 0) rows.segment(t * g.stage_rows, g.stage_rows) += coupling.Eu[i] * nu + coupling.Ex[i] * xi;
      }
      sparse += 0.5 * xi.dot(a.P * xi);
    }
    rep.index.push_back(k);
    cost_err.push_back(std::abs(eval_condensed_cost(g, u, x) - sparse) / std::max(1.0, std::abs(sparse)));
    row_err.push_back(g.coupling_rows() ? (g.coupling_lhs(u, x) - rows).cwiseAbs().maxCoeff() : 0.0);
  }
  auto maxof = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); };
  rep.checks.push_back(check_le("max relative cost error", maxof(cost_err), tol));
  rep.checks.push_back(check_le("max coupling row error", maxof(row_err), tol));
  return rep;
}

std::vector<VectorXd> sample_states(const VectorXd& center, double spread, int count, std::uint64_t seed,
                                    const std::function<bool(const VectorXd&)>& accept, int max_tries) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<VectorXd> out;
  for (int tries = 0; tries < max_tries && static_cast<int>(out.size()) < count; ++tries) {
    VectorXd x = center;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += spread * nd(rng);
    if (accept(x)) out.push_back(std::move(x));
  }
  if (static_cast<int>(out.size()) < count) throw ValueError("sample_states: acceptance rate too low");
  return out;
}

}  // namespace tdmpc::analysis
