#include "tdmpc/coordinator.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "tdmpc/errors.hpp"

namespace tdmpc {

AdaState AdaState::start(const VectorXd& lambda, double alpha, double epsilon) {
  AdaState st;
  st.lambda = lambda;
  st.mu = lambda;
  st.theta = 1.0;
  st.alpha = alpha;
  st.epsilon = epsilon;
  st.j = 0;
  return st;
}

namespace {

double spectral_norm(const MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd dual_hessian_block(const CondensedAgent& a) { return a.E * a.H_llt.solve(a.E.transpose()); }

}  // namespace

double lipschitz_constant(const GlobalQP& g, double epsilon) {
  double sum = 0.0;
  for (const auto& a : g.agents) {
    const double s = spectral_norm(dual_hessian_block(a));
    sum += s * s;
  }
  return epsilon + std::sqrt(sum);
}

double lipschitz_constant_aggregate(const GlobalQP& g, double epsilon) {
  MatrixXd S = MatrixXd::Zero(g.coupling_rows(), g.coupling_rows());
  for (const auto& a : g.agents) S += dual_hessian_block(a);
  return epsilon + spectral_norm(S);
}

double default_step(double lipschitz) {
  if (!(lipschitz > 0.0)) throw ValueError("default_step: Lipschitz constant must be positive");
  return 0.99 / lipschitz;
}

int min_iterations(double alpha, double epsilon) {
  if (!(alpha > 0.0) || !(epsilon > 0.0)) throw ValueError("min_iterations: alpha and epsilon must be positive");
  const double threshold = 2.0 / std::sqrt(alpha * epsilon) - 1.0;
  const double next = std::floor(threshold) + 1.0;
  return static_cast<int>(std::max(1.0, next));
}

double contraction_factor(double alpha, double epsilon, int iters) {
  return 2.0 / std::sqrt(alpha * epsilon) / (iters + 1.0);
}

AdaState ada_step(const AdaState& st, const GlobalQP& g, const VectorXd& x, const LocalQpOptions& local,
                  AdaRound* round) {
  if (st.lambda.size() != g.coupling_rows()) throw DimensionError("ada_step: multiplier has wrong size");
  VectorXd aggregate = VectorXd::Zero(g.coupling_rows());
  if (round) round->local.clear();
  // Agent updates; the reduction runs in agent order.
  for (std::size_t i = 0; i < g.agents.size(); ++i) {
    const auto& a = g.agents[i];
    const VectorXd xi = g.agent_state(x, i);
    LocalSolve sol = solve_local(a, xi, st.lambda, local);
    aggregate += a.F * xi + a.E * sol.u;
    if (round) round->local.push_back(std::move(sol));
  }
  AdaState next = st;
  next.mu = (st.lambda + st.alpha * (aggregate - g.b - st.epsilon * st.lambda)).cwiseMax(0.0);
  next.theta = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.theta * st.theta));
  next.lambda = next.mu + ((st.theta - 1.0) / next.theta) * (next.mu - st.mu);
  next.j = st.j + 1;
  if (round) round->aggregate = std::move(aggregate);
  return next;
}

AdaRun run_ada(const VectorXd& lambda_init, const VectorXd& x, int iters, const GlobalQP& g, double epsilon,
               double alpha, const AdaOptions& opts) {
  if (iters < 0) throw ValueError("run_ada: iteration count must be >= 0");
  AdaRun run;
  run.state = AdaState::start(lambda_init, alpha, epsilon);
  AdaRound round;
  for (int k = 0; k < iters; ++k) {
    AdaState next = ada_step(run.state, g, x, opts.local, opts.record_diagnostics ? &round : nullptr);
    if (opts.record_diagnostics) {
      AdaIterate row;
      row.j = k;
      row.residual_norm = (round.aggregate - g.b).cwiseMax(0.0).norm();
      row.step_norm = (next.mu - run.state.mu).norm();
      row.dual_cost = opts.record_dual_cost ? dual_cost(next.mu, x, g, epsilon, opts.local)
                                            : std::numeric_limits<double>::quiet_NaN();
      run.diagnostics.push_back(row);
    }
    run.state = std::move(next);
    if (opts.on_iterate) opts.on_iterate(run.state);
  }
  run.lambda = run.state.lambda;
  run.mu = run.state.mu;
  return run;
}

double dual_cost(const VectorXd& lambda, const VectorXd& x, const GlobalQP& g, double epsilon,
                 const LocalQpOptions& local) {
  if (lambda.size() != g.coupling_rows()) throw DimensionError("dual_cost: multiplier has wrong size");
  if (lambda.size() > 0 && lambda.minCoeff() < -1e-12) {
    throw DomainError("dual_cost: the support term is +inf for negative multipliers");
  }
  double value = 0.0;
  VectorXd rhs = g.b;
  for (std::size_t i = 0; i < g.agents.size(); ++i) {
    const VectorXd xi = g.agent_state(x, i);
    value -= solve_local(g.agents[i], xi, lambda, local).value;
    rhs -= g.agents[i].F * xi;
  }
  value += lambda.dot(rhs) + 0.5 * epsilon * lambda.squaredNorm();
  return value;
}

void write_diagnostics_csv(std::ostream& os, const std::vector<AdaIterate>& rows) {
  os << "# tdmpc-diagnostics v1\n";
  os << "j,dual_cost,residual_norm,step_norm\n";
  os << std::setprecision(17);
  for (const auto& r : rows) os << r.j << ',' << r.dual_cost << ',' << r.residual_norm << ',' << r.step_norm << '\n';
}

}  // namespace tdmpc
