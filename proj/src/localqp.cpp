#include "tdmpc/localqp.hpp"

#include <algorithm>
#include <sstream>

#include "tdmpc/errors.hpp"
#include "tdmpc/qp.hpp"

namespace tdmpc {

LocalSolve solve_local(const CondensedAgent& ca, const VectorXd& x, const VectorXd& lambda,
                       const LocalQpOptions& opts) {
  if (x.size() != ca.n) throw DimensionError("solve_local: state has wrong size");
  if (lambda.size() != ca.E.rows()) throw DimensionError("solve_local: multiplier has wrong size");

  VectorXd lin = ca.G * x;
  if (ca.E.rows() > 0) lin += ca.E.transpose() * lambda;
  const VectorXd rhs = ca.c - ca.D * x;

  // Rows whose normal vanishes only constrain the parameter x.
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(ca.C.rows()));
  for (Eigen::Index r = 0; r < ca.C.rows(); ++r) {
    if (ca.C.row(r).cwiseAbs().maxCoeff() > 0.0) {
      keep.push_back(r);
    } else if (rhs(r) < -opts.feas_tol) {
      std::ostringstream os;
      os << "local constraint row " << r << " violated by the measured state (slack " << rhs(r) << ")";
      throw Infeasible(os.str());
    }
  }
  MatrixXd A(static_cast<Eigen::Index>(keep.size()), ca.C.cols());
  VectorXd b(A.rows());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    A.row(static_cast<Eigen::Index>(k)) = ca.C.row(keep[k]);
    b(static_cast<Eigen::Index>(k)) = rhs(keep[k]);
  }

  const auto res = qp::solve(ca.H_llt, lin, A, b);
  if (res.status == qp::Status::Infeasible) throw Infeasible("local feasible set is empty at the measured state");
  if (res.status == qp::Status::MaxIters) throw MaxIters("local QP did not terminate");

  LocalSolve out;
  out.u = res.x;
  out.inner_iters = res.iterations;
  out.multipliers = VectorXd::Zero(ca.C.rows());
  for (std::size_t k = 0; k < keep.size(); ++k) out.multipliers(keep[k]) = res.multipliers(static_cast<Eigen::Index>(k));
  for (int a : res.active) out.active_set.push_back(static_cast<int>(keep[static_cast<std::size_t>(a)]));
  out.kkt_residual = qp::kkt_residual(ca.H, lin, ca.C, rhs, out.u, out.multipliers).max();
  const double scale = std::max({1.0, lin.cwiseAbs().maxCoeff(), rhs.size() ? rhs.cwiseAbs().maxCoeff() : 0.0});
  if (out.kkt_residual > opts.inner_tol * scale) {
    std::ostringstream os;
    os << "local QP KKT residual " << out.kkt_residual << " above tolerance";
    throw MaxIters(os.str());
  }
  out.value = 0.5 * out.u.dot(ca.H * out.u) + lin.dot(out.u) + 0.5 * x.dot(ca.W * x);
  return out;
}

VectorXd recover_input(const CondensedAgent& ca, const VectorXd& x, const VectorXd& lambda,
                       const LocalQpOptions& opts) {
  return ca.first_input(solve_local(ca, x, lambda, opts).u);
}

VectorXd recover_inputs(const GlobalQP& g, const VectorXd& x, const VectorXd& lambda, const LocalQpOptions& opts) {
  Eigen::Index m = 0;
  for (const auto& a : g.agents) m += a.m;
  VectorXd u(m);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < g.agents.size(); ++i) {
    u.segment(off, g.agents[i].m) = recover_input(g.agents[i], g.agent_state(x, i), lambda, opts);
    off += g.agents[i].m;
  }
  return u;
}

}  // namespace tdmpc
