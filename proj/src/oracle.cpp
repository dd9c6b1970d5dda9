#include "tdmpc/oracle.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "tdmpc/errors.hpp"
#include "tdmpc/qp.hpp"

namespace tdmpc {

OracleSolution solve_centralized(const GlobalQP& g, const VectorXd& x, double epsilon, const OracleOptions& opts) {
  if (x.size() != g.total_states()) throw DimensionError("solve_centralized: state has wrong size");
  if (epsilon < 0.0) throw ValueError("solve_centralized: epsilon must be >= 0");
  const Eigen::Index nu = g.total_inputs();
  const Eigen::Index np = g.coupling_rows();
  const bool regularized = epsilon > 0.0;
  const Eigen::Index nvar = nu + (regularized ? np : 0);

  MatrixXd H = MatrixXd::Zero(nvar, nvar);
  VectorXd lin = VectorXd::Zero(nvar);
  Eigen::Index local_rows = 0;
  for (const auto& a : g.agents) local_rows += a.C.rows();

  // Local rows first (agent order), then coupling rows.
  MatrixXd A = MatrixXd::Zero(local_rows + np, nvar);
  VectorXd b(local_rows + np);
  VectorXd coupling_rhs = g.b;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < g.agents.size(); ++i) {
    const auto& a = g.agents[i];
    const Eigen::Index off = g.input_offset(i);
    const Eigen::Index len = a.H.rows();
    const VectorXd xi = g.agent_state(x, i);
    H.block(off, off, len, len) = a.H;
    lin.segment(off, len) = a.G * xi;
    A.block(row, off, a.C.rows(), len) = a.C;
    b.segment(row, a.C.rows()) = a.c - a.D * xi;
    row += a.C.rows();
    if (np > 0) {
      A.block(local_rows, off, np, len) = a.E;
      coupling_rhs -= a.F * xi;
    }
  }
  b.tail(np) = coupling_rhs;
  if (regularized) {
    H.bottomRightCorner(np, np) = MatrixXd::Identity(np, np) / epsilon;
    A.bottomRightCorner(np, np) = -MatrixXd::Identity(np, np);
  }

  // Drop rows that only constrain x, after checking them.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    if (A.row(r).cwiseAbs().maxCoeff() > 0.0) {
      keep.push_back(r);
    } else if (b(r) < -1e-8) {
      throw Infeasible("parameter-only constraint violated: state outside the feasible region");
    }
  }
  MatrixXd Ak(static_cast<Eigen::Index>(keep.size()), nvar);
  VectorXd bk(Ak.rows());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    Ak.row(static_cast<Eigen::Index>(k)) = A.row(keep[k]);
    bk(static_cast<Eigen::Index>(k)) = b(keep[k]);
  }

  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw ValueError("solve_centralized: Hessian is not positive definite");
  qp::Options qopts;
  qopts.max_iterations = static_cast<int>(50 * (Ak.rows() + nvar) + 100);
  const auto res = qp::solve(llt, lin, Ak, bk, qopts);
  if (res.status == qp::Status::Infeasible) throw Infeasible("centralized problem infeasible at this state");
  if (res.status == qp::Status::MaxIters) throw NoConvergence("centralized QP hit its iteration cap");

  VectorXd mult = VectorXd::Zero(A.rows());
  for (std::size_t k = 0; k < keep.size(); ++k) mult(keep[k]) = res.multipliers(static_cast<Eigen::Index>(k));

  OracleSolution sol;
  sol.u_star = res.x.head(nu);
  sol.nu_star = mult.head(local_rows);
  sol.lambda_star = mult.tail(np);
  const auto kkt = qp::kkt_residual(H, lin, A, b, res.x, mult);
  sol.kkt_residual = kkt.max();
  sol.complementarity = kkt.complementarity;
  sol.value = eval_condensed_cost(g, sol.u_star, x);
  sol.objective = sol.value;
  if (regularized) sol.objective += res.x.tail(np).squaredNorm() / (2.0 * epsilon);

  if (sol.kkt_residual > opts.kkt_tol) {
    std::ostringstream os;
    os << "centralized KKT residual " << sol.kkt_residual << " above " << opts.kkt_tol;
    throw NoConvergence(os.str());
  }

  if (!regularized && !res.active.empty()) {
    MatrixXd N(nvar, static_cast<Eigen::Index>(res.active.size()));
    for (std::size_t k = 0; k < res.active.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = Ak.row(res.active[k]).transpose();
    Eigen::FullPivLU<MatrixXd> lu(N);
    sol.dual_maybe_nonunique = lu.rank() < N.cols();
  }
  return sol;
}

double value_function(const GlobalQP& g, const VectorXd& x) {
  const auto sol = solve_centralized(g, x, 0.0);
  return std::sqrt(std::max(0.0, sol.value));
}

VectorXd optimal_feedback(const GlobalQP& g, const VectorXd& x) {
  return g.first_inputs(solve_centralized(g, x, 0.0).u_star);
}

VectorXd regularized_feedback(const GlobalQP& g, const VectorXd& x, double epsilon) {
  const auto sol = solve_centralized(g, x, epsilon);
  return recover_inputs(g, x, sol.lambda_star);
}

FeedbackLaws feedback_laws(const GlobalQP& g, const VectorXd& x, double epsilon) {
  return {optimal_feedback(g, x), regularized_feedback(g, x, epsilon)};
}

}  // namespace tdmpc
