#pragma once

#include <vector>

#include "tdmpc/condense.hpp"

namespace tdmpc {

struct LocalQpOptions {
  double inner_tol = 1e-9;
  double feas_tol = 1e-8;
};

/// Result of one agent's subproblem
///   min_v f(v, x) + lambda' E v   s.t.  D x + C v <= c.
struct LocalSolve {
  VectorXd u;
  /// Multipliers of the local rows (zero when inactive).
  VectorXd multipliers;
  std::vector<int> active_set;
  double kkt_residual = 0.0;
  int inner_iters = 0;
  /// Optimal value of the subproblem, including the 1/2 x'Wx term.
  double value = 0.0;
};

/// Throws Infeasible when the local set is empty at x (x outside the feasible region
/// for this agent) and MaxIters when the inner solver stalls.
LocalSolve solve_local(const CondensedAgent& ca, const VectorXd& x, const VectorXd& lambda,
                       const LocalQpOptions& opts = {});

/// First-stage input of the subproblem minimizer.
VectorXd recover_input(const CondensedAgent& ca, const VectorXd& x, const VectorXd& lambda,
                       const LocalQpOptions& opts = {});

/// Stacked first-stage inputs for every agent.
VectorXd recover_inputs(const GlobalQP& g, const VectorXd& x, const VectorXd& lambda,
                        const LocalQpOptions& opts = {});

}  // namespace tdmpc
