#pragma once

#include <Eigen/Dense>

namespace tdmpc {

struct DareSolution {
  Eigen::MatrixXd P;
  /// Feedback gain for u = -K x.
  Eigen::MatrixXd K;
  int iterations = 0;
  /// Frobenius norm of the fixed-point residual.
  double residual = 0.0;
};

struct DareOptions {
  int max_iterations = 100000;
  double tolerance = 1e-12;
};

/// Solves P = Q + A'PA - A'PB (R + B'PB)^{-1} B'PA by fixed-point iteration from P = Q.
/// Throws NoConvergence when the iteration does not settle within the cap, which is
/// how a non-stabilizable (A, B) shows up.
DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                        const Eigen::MatrixXd& R, const DareOptions& opts = {});

/// Riccati operator evaluated once; used to measure residuals.
Eigen::MatrixXd riccati_map(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                            const Eigen::MatrixXd& R, const Eigen::MatrixXd& P);

/// Gain minimizing the one-step cost-to-go for a given P.
Eigen::MatrixXd riccati_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& R,
                             const Eigen::MatrixXd& P);

/// (A-BK)'P(A-BK) - P + Q + K'RK. Negative semidefinite iff the terminal decrease condition holds.
Eigen::MatrixXd terminal_decrease_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                           const Eigen::MatrixXd& P, const Eigen::MatrixXd& K);

}  // namespace tdmpc
