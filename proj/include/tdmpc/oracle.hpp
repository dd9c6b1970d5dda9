#pragma once

#include "tdmpc/condense.hpp"
#include "tdmpc/localqp.hpp"

namespace tdmpc {

/// Centralized reference solution of the condensed problem at one parameter x.
struct OracleSolution {
  VectorXd u_star;       ///< stacked input trajectories
  VectorXd lambda_star;  ///< coupling multipliers (>= 0)
  VectorXd nu_star;      ///< stacked local multipliers, agent order
  double kkt_residual = 0.0;
  double complementarity = 0.0;
  /// f(u*, x), the unregularized cost at the solution.
  double value = 0.0;
  /// f(u*, x) + |y*|^2 / (2 eps) for eps > 0; equals `value` for eps = 0.
  double objective = 0.0;
  /// eps = 0 only: active constraint normals are rank deficient, so the dual may not be unique.
  bool dual_maybe_nonunique = false;
};

struct OracleOptions {
  double kkt_tol = 1e-9;
};

/// eps > 0: solves min f(u,x) + |y|^2/(2 eps) s.t. local rows, E u + F x <= b + y, whose
/// coupling multipliers are the regularized dual solution. eps = 0: the plain problem.
/// Throws Infeasible when x is outside the feasible region, NoConvergence when the KKT
/// certificate misses the tolerance.
OracleSolution solve_centralized(const GlobalQP& g, const VectorXd& x, double epsilon,
                                 const OracleOptions& opts = {});

/// sqrt of the optimal (unregularized) cost.
double value_function(const GlobalQP& g, const VectorXd& x);

struct FeedbackLaws {
  VectorXd kappa;      ///< first inputs of the optimal trajectory
  VectorXd kappa_eps;  ///< first inputs recovered from the regularized dual solution
};

FeedbackLaws feedback_laws(const GlobalQP& g, const VectorXd& x, double epsilon);

/// First inputs of S^p(x).
VectorXd optimal_feedback(const GlobalQP& g, const VectorXd& x);

/// q(S^d_eps(x), x).
VectorXd regularized_feedback(const GlobalQP& g, const VectorXd& x, double epsilon);

}  // namespace tdmpc
