#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tdmpc::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Status { Optimal, Infeasible, MaxIters };

struct Result {
  Status status = Status::Optimal;
  VectorXd x;
  /// One multiplier per row of A, zero for inactive rows.
  VectorXd multipliers;
  std::vector<int> active;
  int iterations = 0;
};

struct Options {
  /// A row counts as violated when b - a'x < -feas_tol * scale(row).
  double feas_tol = 1e-12;
  /// 0 picks 10 * (rows + variables) + 50.
  int max_iterations = 0;
};

/// Strictly convex dense QP
///
///   min 1/2 x'Hx + g'x   s.t.  A x <= b
///
/// solved with the Goldfarb-Idnani dual active-set method. H is passed through its
/// Cholesky factor so that callers solving many QPs with the same Hessian factor once.
/// Opposite row pairs (equalities written as two inequalities) and rows with a zero
/// normal are handled; linearly dependent candidates are resolved by the drop step.
Result solve(const Eigen::LLT<MatrixXd>& H_llt, const VectorXd& g, const MatrixXd& A, const VectorXd& b,
             const Options& opts = {});

struct KktResidual {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/// Infinity-norm residuals of the KKT system of the QP above at (x, multipliers).
KktResidual kkt_residual(const MatrixXd& H, const VectorXd& g, const MatrixXd& A, const VectorXd& b,
                         const VectorXd& x, const VectorXd& multipliers);

}  // namespace tdmpc::qp
