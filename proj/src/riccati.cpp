#include "tdmpc/riccati.hpp"

#include <cmath>
#include <string>

#include "tdmpc/errors.hpp"

namespace tdmpc {

using Eigen::MatrixXd;

MatrixXd riccati_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& R, const MatrixXd& P) {
  const MatrixXd S = R + B.transpose() * P * B;
  return S.ldlt().solve(B.transpose() * P * A);
}

MatrixXd riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                     const MatrixXd& P) {
  const MatrixXd K = riccati_gain(A, B, R, P);
  MatrixXd next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
  return 0.5 * (next + next.transpose());
}

MatrixXd terminal_decrease_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                                    const MatrixXd& R, const MatrixXd& P, const MatrixXd& K) {
  const MatrixXd Acl = A - B * K;
  MatrixXd res = Acl.transpose() * P * Acl - P + Q + K.transpose() * R * K;
  return 0.5 * (res + res.transpose());
}

DareSolution solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                        const DareOptions& opts) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || Q.cols() != A.cols() ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw DimensionError("solve_dare: inconsistent matrix sizes");
  }
  DareSolution sol;
  MatrixXd P = Q;
  for (int k = 1; k <= opts.max_iterations; ++k) {
    MatrixXd next = riccati_map(A, B, Q, R, P);
    if (!next.allFinite()) break;
    const double step = (next - P).stableNorm();
    P = std::move(next);
    sol.iterations = k;
    if (!std::isfinite(step)) break;
    if (step <= opts.tolerance * std::max(1.0, P.stableNorm())) {
      sol.P = P;
      sol.K = riccati_gain(A, B, R, P);
      sol.residual = (riccati_map(A, B, Q, R, P) - P).norm();
      return sol;
    }
  }
  throw NoConvergence("solve_dare: Riccati iteration did not converge after " +
                      std::to_string(sol.iterations) + " iterations (pair not stabilizable?)");
}

}  // namespace tdmpc
