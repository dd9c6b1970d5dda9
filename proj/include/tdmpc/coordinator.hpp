#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "tdmpc/condense.hpp"
#include "tdmpc/localqp.hpp"

namespace tdmpc {

/// Dual iterate triple of the accelerated projected dual ascent.
struct AdaState {
  VectorXd lambda;  ///< extrapolated multiplier, broadcast to agents
  VectorXd mu;      ///< projected multiplier, always >= 0
  double theta = 1.0;
  double alpha = 0.0;
  double epsilon = 0.0;
  int j = 0;

  /// Algorithm initialization: mu = lambda, theta = 1.
  static AdaState start(const VectorXd& lambda, double alpha, double epsilon);
};

/// epsilon + sqrt(sum_i ||E_i H_i^{-1} E_i'||^2), spectral norms.
double lipschitz_constant(const GlobalQP& g, double epsilon);

/// epsilon + ||sum_i E_i H_i^{-1} E_i'||, the smallest Lipschitz constant of the regularized
/// dual gradient on the region where the local active sets do not change.
double lipschitz_constant_aggregate(const GlobalQP& g, double epsilon);

/// 0.99 / L.
double default_step(double lipschitz);

/// Smallest integer iteration count strictly above 2/sqrt(alpha*epsilon) - 1 (at least 1).
int min_iterations(double alpha, double epsilon);

/// 2/sqrt(alpha*epsilon) / (iters + 1).
double contraction_factor(double alpha, double epsilon, int iters);

/// What the coordinator saw during one round.
struct AdaRound {
  std::vector<LocalSolve> local;
  VectorXd aggregate;  ///< sum_i F_i x_i + E_i u_i
};

/// One gather/broadcast round at parameter x.
AdaState ada_step(const AdaState& st, const GlobalQP& g, const VectorXd& x, const LocalQpOptions& local = {},
                  AdaRound* round = nullptr);

struct AdaIterate {
  int j = 0;
  double dual_cost = 0.0;      ///< psi_eps(mu_{j+1}, x); NaN unless recorded
  double residual_norm = 0.0;  ///< |(aggregate - b)_+|
  double step_norm = 0.0;      ///< |mu_{j+1} - mu_j|
};

struct AdaOptions {
  LocalQpOptions local;
  bool record_dual_cost = false;
  bool record_diagnostics = true;
  /// Called after every round with the new state.
  std::function<void(const AdaState&)> on_iterate;
};

struct AdaRun {
  AdaState state;
  VectorXd lambda;  ///< output of the iteration operator, lambda_l
  VectorXd mu;      ///< projected iterate mu_l
  std::vector<AdaIterate> diagnostics;
};

/// Applies `iters` rounds from lambda_init (iters = 0 returns lambda_init).
AdaRun run_ada(const VectorXd& lambda_init, const VectorXd& x, int iters, const GlobalQP& g, double epsilon,
               double alpha, const AdaOptions& opts = {});

/// Regularized dual objective
///   psi_eps(l, x) = sum_i -min_{v in Z_i(x_i)} [f_i(v, x_i) + l' E_i v] + l'(b - sum_i F_i x_i) + eps/2 |l|^2
/// defined for l >= 0; throws DomainError for negative entries below -1e-12.
double dual_cost(const VectorXd& lambda, const VectorXd& x, const GlobalQP& g, double epsilon,
                 const LocalQpOptions& local = {});

/// CSV with header comment `# tdmpc-diagnostics v1` and columns j,dual_cost,residual_norm,step_norm.
void write_diagnostics_csv(std::ostream& os, const std::vector<AdaIterate>& rows);

}  // namespace tdmpc
