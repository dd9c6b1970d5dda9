#include "tdmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tdmpc::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rotation (c, s) with [c s; -s c] [a; b] = [r; 0].
inline void givens(double a, double b, double& c, double& s, double& r) {
  r = std::hypot(a, b);
  if (r == 0.0) {
    c = 1.0;
    s = 0.0;
  } else {
    c = a / r;
    s = b / r;
  }
}

inline void rotate_columns(MatrixXd& J, Eigen::Index i, Eigen::Index k, double c, double s) {
  for (Eigen::Index r = 0; r < J.rows(); ++r) {
    const double a = J(r, i);
    const double b = J(r, k);
    J(r, i) = c * a + s * b;
    J(r, k) = -s * a + c * b;
  }
}

// Working factorization: J' N_active = [R; 0], J' H J = I.
class ActiveSet {
 public:
  ActiveSet(MatrixXd J, Eigen::Index n) : J_(std::move(J)), R_(MatrixXd::Zero(n, n)), n_(n) {}

  Eigen::Index size() const { return q_; }
  const MatrixXd& J() const { return J_; }

  // z = J2 J2' normal, r = R^{-1} J1' normal.
  void directions(const VectorXd& normal, VectorXd& d, VectorXd& z, VectorXd& r) const {
    d = J_.transpose() * normal;
    z = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
    if (q_ > 0) {
      r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
    } else {
      r.resize(0);
    }
  }

  // Appends a column with J' normal = d. Returns false when the new normal is dependent.
  bool add(VectorXd d) {
    for (Eigen::Index j = n_ - 1; j > q_; --j) {
      double c, s, h;
      givens(d(j - 1), d(j), c, s, h);
      if (s == 0.0) continue;
      d(j - 1) = h;
      d(j) = 0.0;
      rotate_columns(J_, j - 1, j, c, s);
    }
    const double scale = std::max(1.0, d.head(q_ + 1).cwiseAbs().maxCoeff());
    if (std::abs(d(q_)) <= 1e-14 * scale) return false;
    R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    ++q_;
    return true;
  }

  // Removes active column `pos` and restores the triangular shape of R.
  void drop(Eigen::Index pos) {
    for (Eigen::Index k = pos; k + 1 < q_; ++k) R_.col(k).head(q_) = R_.col(k + 1).head(q_);
    R_.col(q_ - 1).setZero();
    for (Eigen::Index j = pos; j + 1 < q_; ++j) {
      double c, s, h;
      givens(R_(j, j), R_(j + 1, j), c, s, h);
      if (s == 0.0) continue;
      for (Eigen::Index k = j; k + 1 < q_; ++k) {
        const double a = R_(j, k);
        const double b = R_(j + 1, k);
        R_(j, k) = c * a + s * b;
        R_(j + 1, k) = -s * a + c * b;
      }
      R_(j + 1, j) = 0.0;
      rotate_columns(J_, j, j + 1, c, s);
    }
    --q_;
    R_.row(q_).setZero();
  }

 private:
  MatrixXd J_;
  MatrixXd R_;
  Eigen::Index n_;
  Eigen::Index q_ = 0;
};

}  // namespace

Result solve(const Eigen::LLT<MatrixXd>& H_llt, const VectorXd& g, const MatrixXd& A, const VectorXd& b,
             const Options& opts) {
  const Eigen::Index n = g.size();
  const Eigen::Index rows = A.rows();
  Result res;
  res.multipliers = VectorXd::Zero(rows);
  res.x = -H_llt.solve(g);
  if (rows == 0) return res;

  // J = L^{-T}.
  const MatrixXd L = H_llt.matrixL();
  MatrixXd J = L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n)).transpose();
  ActiveSet work(std::move(J), n);

  std::vector<int> active;      // row indices, in factorization order
  VectorXd u(0);                // multipliers of `active`
  std::vector<char> is_active(static_cast<std::size_t>(rows), 0);
  const VectorXd row_norm = A.rowwise().norm();

  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * (rows + n) + 50);
  VectorXd d, z, r;
  VectorXd& x = res.x;

  auto slack = [&](Eigen::Index i) { return b(i) - A.row(i).dot(x); };
  auto tol_for = [&](Eigen::Index i) {
    return opts.feas_tol * std::max({1.0, std::abs(b(i)), row_norm(i) * x.cwiseAbs().maxCoeff()});
  };

  while (true) {
    // Step 1: most violated row (scaled by its norm).
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (is_active[static_cast<std::size_t>(i)]) continue;
      const double s = slack(i);
      if (s < -tol_for(i)) {
        const double score = s / std::max(row_norm(i), 1e-300);
        if (p < 0 || score < worst) {
          worst = score;
          p = i;
        }
      }
    }
    if (p < 0) break;

    VectorXd u_plus(u.size() + 1);
    u_plus.head(u.size()) = u;
    u_plus(u.size()) = 0.0;
    const VectorXd normal = -A.row(p).transpose();

    // Step 2: move until p is satisfied, dropping blocking rows on the way.
    while (true) {
      if (++res.iterations > max_iter) {
        res.status = Status::MaxIters;
        res.active = active;
        return res;
      }
      work.directions(normal, d, z, r);
      const Eigen::Index q = work.size();

      double t1 = kInf;
      Eigen::Index drop_pos = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u_plus(k) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            drop_pos = k;
          }
        }
      }
      double t2 = kInf;
      const double zn = z.dot(normal);
      if (z.norm() > 1e-14 * std::max(1.0, normal.norm()) && zn > 0.0) t2 = -slack(p) / zn;

      if (t1 == kInf && t2 == kInf) {
        res.status = Status::Infeasible;
        res.active = active;
        return res;
      }

      if (t2 == kInf) {
        // Pure dual step.
        u_plus.head(q) -= t1 * r;
        u_plus(q) += t1;
      } else {
        const double t = std::min(t1, t2);
        x += t * z;
        u_plus.head(q) -= t * r;
        u_plus(q) += t;
        if (t2 <= t1) {
          if (!work.add(d)) {
            // Numerically dependent: treat as satisfied at the current point.
            u = u_plus.head(q);
          } else {
            active.push_back(static_cast<int>(p));
            is_active[static_cast<std::size_t>(p)] = 1;
            u = u_plus.cwiseMax(0.0);
          }
          break;
        }
      }
      // Partial step: drop the blocking row and retry.
      const int dropped = active[static_cast<std::size_t>(drop_pos)];
      is_active[static_cast<std::size_t>(dropped)] = 0;
      active.erase(active.begin() + drop_pos);
      VectorXd shrunk(u_plus.size() - 1);
      shrunk << u_plus.head(drop_pos), u_plus.tail(u_plus.size() - drop_pos - 1);
      u_plus = shrunk.cwiseMax(0.0);
      work.drop(drop_pos);
      if (slack(p) >= -tol_for(p)) {
        // The partial step already satisfied p; keep multipliers consistent.
        u = u_plus.head(u_plus.size() - 1);
        if (u_plus(u_plus.size() - 1) > 0.0) {
          work.directions(normal, d, z, r);
          if (work.add(d)) {
            active.push_back(static_cast<int>(p));
            is_active[static_cast<std::size_t>(p)] = 1;
            u = u_plus;
          }
        }
        break;
      }
    }
  }

  for (std::size_t k = 0; k < active.size(); ++k) res.multipliers(active[k]) = u(static_cast<Eigen::Index>(k));
  res.active = std::move(active);
  std::sort(res.active.begin(), res.active.end());
  return res;
}

double KktResidual::max() const { return std::max({stationarity, primal, dual, complementarity}); }

KktResidual kkt_residual(const MatrixXd& H, const VectorXd& g, const MatrixXd& A, const VectorXd& b,
                         const VectorXd& x, const VectorXd& multipliers) {
  KktResidual k;
  VectorXd grad = H * x + g;
  if (A.rows() > 0) grad += A.transpose() * multipliers;
  k.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (A.rows() > 0) {
    const VectorXd s = b - A * x;
    k.primal = std::max(0.0, -s.minCoeff());
    k.dual = std::max(0.0, -multipliers.minCoeff());
    k.complementarity = (multipliers.array() * s.array()).abs().maxCoeff();
  }
  return k;
}

}  // namespace tdmpc::qp
