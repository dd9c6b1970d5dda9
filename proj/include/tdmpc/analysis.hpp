#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tdmpc/condense.hpp"
#include "tdmpc/io.hpp"
#include "tdmpc/model.hpp"
#include "tdmpc/oracle.hpp"
#include "tdmpc/plant.hpp"

namespace tdmpc::analysis {

/// One pass/fail line. `relation` is "<=" or "<" and reads measured `relation` limit.
struct Check {
  std::string name;
  double measured = 0.0;
  double limit = 0.0;
  std::string relation = "<=";
  bool passed = false;
};

Check check_le(std::string name, double measured, double limit);
Check check_lt(std::string name, double measured, double limit);

struct ExperimentReport {
  std::string id;
  json parameters = json::object();
  std::string scenario_hash;
  /// Named metric series; all series of a report share the index column `index`.
  std::vector<double> index;
  std::map<std::string, std::vector<double>> series;
  std::vector<Check> checks;
  std::vector<std::string> flags;

  bool passed() const;
  json to_json() const;
  /// One row per index entry, series in name order, blank where a series is shorter.
  void write_csv(std::ostream& os) const;
};

/// Least-squares slope of log y against log x over entries with x, y > 0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Runs fn(0..count-1) on up to `jobs` threads; results must be written to disjoint slots.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------------------
// Dual optimizer at a fixed parameter

/// Dual gap psi(mu_l) - psi(S) against 2|lambda0 - S|^2 / (alpha (l+1)^2) for l = 1..iters.
/// Checks the bound with `slack` and the log-log slope of the upper gap envelope on
/// [10, iters] against -2 + 0.2 when the envelope stays above round-off.
ExperimentReport suboptimality_curve(const GlobalQP& g, const VectorXd& x, const VectorXd& lambda0, int iters,
                                     double epsilon, double alpha, double slack = 1e-8,
                                     const OracleOptions& oracle = {});

struct ContractionOptions {
  int trials = 50;
  std::uint64_t seed = 0;
  double start_scale = 3.0;  ///< spread of random starts around the optimum
  double slack = 1e-6;
};

/// eta-hat = max over random starts lambda >= 0 of |T^l(lambda) - S| / |lambda - S|, compared
/// with 2/sqrt(alpha eps)/(l+1). Skipped with a flag when l < min_iterations(alpha, eps).
ExperimentReport contraction_estimate(const GlobalQP& g, const VectorXd& x, int iters, double epsilon, double alpha,
                                      const ContractionOptions& opts = {});

// ---------------------------------------------------------------------------------------
// Closed loop

/// Per-step maximum coupling violation of a trace.
std::vector<double> violation_profile(const ClosedLoopTrace& trace);
double peak_violation(const ClosedLoopTrace& trace);

/// max_t |x_t - y_t| over the common prefix.
double max_state_error(const ClosedLoopTrace& a, const ClosedLoopTrace& b);

/// |x_T| of the last recorded state (error coordinates).
double final_error(const ClosedLoopTrace& trace);

struct SweepPoint {
  int iterations = 1;
  ClosedLoopTrace trace;
};

/// Nominal closed loops for each iteration count.
std::vector<SweepPoint> iteration_sweep(const Scenario& s, const std::vector<int>& iters, int steps, int jobs = 1);

/// Peak violation per iteration count; checks that it does not grow with l (tolerance `tol`).
ExperimentReport violation_report(const Scenario& s, const std::vector<SweepPoint>& sweep, double tol = 1e-6);

/// Smallest l in `candidates` whose nominal loop reaches |x_T| <= tol without leaving
/// the feasible region. Returns -1 if none does.
int stability_threshold(const Scenario& s, const std::vector<int>& candidates, int steps, double tol = 1e-3);

// ---------------------------------------------------------------------------------------
// Oracle-side properties

/// r(eps) = |kappa(x) - kappa_eps(x)| / |x| per state. Checks the fitted log-log slope of each
/// state against `slope_limit` and that r stays below C sqrt(eps) (1 + margin), with C fitted on
/// the largest `fit_points` values of eps.
struct RegularizationOptions {
  double slope_limit = 0.6;
  double margin = 0.1;
  int fit_points = 2;
};
ExperimentReport regularization_sweep(const GlobalQP& g, const std::vector<VectorXd>& states,
                                      const std::vector<double>& eps_list, const RegularizationOptions& opts = {});

/// phi(x_{t+1}) / phi(x_t) along nominal optimal-MPC closed loops from each start; beta-hat is
/// the maximum over steps with |x_t| > floor. Checks beta-hat < 1.
ExperimentReport lyapunov_decrease(const Scenario& s, const std::vector<VectorXd>& starts, int steps,
                                   double floor = 1e-6);

struct IssOptions {
  int steps = 60;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double nominal_limit = 1e-3;
  int jobs = 1;
};

/// Trailing-half max |x_t| per disturbance bound (max over seeds, uniform disturbances in the
/// box of half-width beta on every state). Checks finiteness, monotonicity in beta and the
/// nominal limit at beta = 0.
ExperimentReport iss_experiment(const Scenario& s, int iters, const std::vector<double>& bounds,
                                const IssOptions& opts = {});

/// Condensed cost and coupling rows against a stage-by-stage rollout on `samples` random
/// (u, x) pairs of the shifted scenario. Checks the relative cost error and the row error.
ExperimentReport condensation_self_test(const Scenario& s, int samples, std::uint64_t seed, double tol = 1e-9);

/// Random states around `center` accepted by `accept`, drawn from a seeded normal spread.
std::vector<VectorXd> sample_states(const VectorXd& center, double spread, int count, std::uint64_t seed,
                                    const std::function<bool(const VectorXd&)>& accept, int max_tries = 10000);

}  // namespace tdmpc::analysis
