#include "tdmpc/model.hpp"

#include <cmath>
#include <sstream>

#include "tdmpc/errors.hpp"
#include "tdmpc/riccati.hpp"

namespace tdmpc {

Polytope Polytope::box(const VectorXd& lower, const VectorXd& upper) {
  const Eigen::Index d = upper.size();
  if (lower.size() != d) throw DimensionError("Polytope::box: bound sizes differ");
  Polytope p{MatrixXd::Zero(2 * d, d), VectorXd(2 * d)};
  for (Eigen::Index k = 0; k < d; ++k) {
    p.C(2 * k, k) = 1.0;
    p.c(2 * k) = upper(k);
    p.C(2 * k + 1, k) = -1.0;
    p.c(2 * k + 1) = -lower(k);
  }
  return p;
}

Polytope Polytope::origin(Eigen::Index dim) {
  Polytope p{MatrixXd(2 * dim, dim), VectorXd::Zero(2 * dim)};
  p.C << MatrixXd::Identity(dim, dim), -MatrixXd::Identity(dim, dim);
  return p;
}

bool Polytope::contains(const VectorXd& z, double tol) const {
  if (rows() == 0) return true;
  return ((C * z - c).array() <= tol).all();
}

Eigen::Index CouplingSpec::rows() const {
  Eigen::Index r = 0;
  for (const auto& g : groups) r += g.b.size();
  return r;
}

CouplingSpec::Stacked CouplingSpec::stacked(const std::vector<AgentModel>& agents) const {
  const Eigen::Index p = rows();
  Stacked out;
  out.b = VectorXd(p);
  for (const auto& a : agents) {
    out.Eu.push_back(MatrixXd::Zero(p, a.m()));
    out.Ex.push_back(MatrixXd::Zero(p, a.n()));
  }
  Eigen::Index offset = 0;
  for (const auto& g : groups) {
    const Eigen::Index r = g.b.size();
    out.b.segment(offset, r) = g.b;
    for (const auto& blk : g.blocks) {
      if (blk.agent < 0 || blk.agent >= static_cast<int>(agents.size())) {
        throw DimensionError("coupling references unknown agent " + std::to_string(blk.agent));
      }
      const auto& a = agents[static_cast<std::size_t>(blk.agent)];
      if (blk.Eu.rows() != r || blk.Eu.cols() != a.m() || blk.Ex.rows() != r || blk.Ex.cols() != a.n()) {
        throw DimensionError("coupling block for agent " + std::to_string(blk.agent) + " has wrong shape");
      }
      out.Eu[static_cast<std::size_t>(blk.agent)].middleRows(offset, r) += blk.Eu;
      out.Ex[static_cast<std::size_t>(blk.agent)].middleRows(offset, r) += blk.Ex;
    }
    offset += r;
  }
  return out;
}

CouplingGroup CouplingSpec::abs_difference(int i, int j, const MatrixXd& select, const VectorXd& bound,
                                           Eigen::Index m_i, Eigen::Index m_j) {
  if (select.rows() != bound.size()) throw DimensionError("abs_difference: selector/bound size mismatch");
  const Eigen::Index k = select.rows();
  const Eigen::Index n = select.cols();
  CouplingGroup g;
  g.b = VectorXd(2 * k);
  MatrixXd Si(2 * k, n), Sj(2 * k, n);
  for (Eigen::Index r = 0; r < k; ++r) {
    Si.row(2 * r) = select.row(r);
    Sj.row(2 * r) = -select.row(r);
    Si.row(2 * r + 1) = -select.row(r);
    Sj.row(2 * r + 1) = select.row(r);
    g.b(2 * r) = bound(r);
    g.b(2 * r + 1) = bound(r);
  }
  g.blocks.push_back({i, MatrixXd::Zero(2 * k, m_i), Si});
  g.blocks.push_back({j, MatrixXd::Zero(2 * k, m_j), Sj});
  return g;
}

Eigen::Index Scenario::total_states() const {
  Eigen::Index n = 0;
  for (const auto& a : agents) n += a.n();
  return n;
}

Eigen::Index Scenario::total_inputs() const {
  Eigen::Index m = 0;
  for (const auto& a : agents) m += a.m();
  return m;
}

VectorXd Scenario::stacked_initial_state() const {
  VectorXd x(total_states());
  Eigen::Index off = 0;
  for (const auto& xi : initial_states) {
    x.segment(off, xi.size()) = xi;
    off += xi.size();
  }
  return x;
}

namespace {

VectorXd stack(const std::vector<VectorXd>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  VectorXd out(n);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

}  // namespace

bool ShiftRecord::is_identity() const {
  for (const auto& v : state_offset)
    if (!v.isZero(0.0)) return false;
  for (const auto& v : input_offset)
    if (!v.isZero(0.0)) return false;
  return true;
}

VectorXd ShiftRecord::stacked_state_offset() const { return stack(state_offset); }
VectorXd ShiftRecord::stacked_input_offset() const { return stack(input_offset); }

VectorXd ShiftedScenario::unshift_state(const VectorXd& x) const { return x + shift.stacked_state_offset(); }
VectorXd ShiftedScenario::unshift_input(const VectorXd& u) const { return u + shift.stacked_input_offset(); }
VectorXd ShiftedScenario::shift_state(const VectorXd& x) const { return x - shift.stacked_state_offset(); }
VectorXd ShiftedScenario::shift_input(const VectorXd& u) const { return u - shift.stacked_input_offset(); }

ShiftedScenario shift_to_target(const Scenario& s) {
  ShiftedScenario out{s, {}};
  const std::size_t M = s.agents.size();
  for (std::size_t i = 0; i < M; ++i) {
    const auto& a = s.agents[i];
    VectorXd xbar = s.targets.empty() ? VectorXd::Zero(a.n()) : s.targets[i];
    if (xbar.size() != a.n()) throw DimensionError("target of agent " + std::to_string(i) + " has wrong size");
    VectorXd ubar = VectorXd::Zero(a.m());
    if (!xbar.isZero(0.0)) {
      // x = A x + B u  =>  B u = (I - A) x; least squares picks the input if one exists.
      const VectorXd rhs = xbar - a.A * xbar;
      if (a.m() > 0) ubar = a.B.completeOrthogonalDecomposition().solve(rhs);
      const double resid = (a.A * xbar + a.B * ubar - xbar).norm();
      if (resid > 1e-9) {
        std::ostringstream os;
        os << "target of agent " << i << " is not an equilibrium (residual " << resid << ")";
        throw NotEquilibrium(os.str());
      }
    }
    auto& sa = out.scenario.agents[i];
    if (sa.input_poly.rows() > 0) sa.input_poly.c -= sa.input_poly.C * ubar;
    if (sa.state_poly.rows() > 0) sa.state_poly.c -= sa.state_poly.C * xbar;
    if (sa.terminal_mode == TerminalMode::Polytope && sa.terminal_poly.rows() > 0) {
      sa.terminal_poly.c -= sa.terminal_poly.C * xbar;
    }
    if (!out.scenario.initial_states.empty()) out.scenario.initial_states[i] -= xbar;
    out.shift.state_offset.push_back(std::move(xbar));
    out.shift.input_offset.push_back(std::move(ubar));
  }
  for (auto& g : out.scenario.coupling.groups) {
    for (const auto& blk : g.blocks) {
      const auto k = static_cast<std::size_t>(blk.agent);
      g.b -= blk.Eu * out.shift.input_offset[k] + blk.Ex * out.shift.state_offset[k];
    }
  }
  if (!out.scenario.targets.empty()) {
    for (auto& t : out.scenario.targets) t.setZero();
  }
  return out;
}

bool is_symmetric(const MatrixXd& M, double tol) {
  if (M.rows() != M.cols()) return false;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, M.cwiseAbs().maxCoeff());
}

bool is_positive_definite(const MatrixXd& M) {
  if (M.rows() != M.cols() || M.rows() == 0) return M.rows() == 0;
  if (!is_symmetric(M)) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
}

void check_dimensions(const Scenario& s) {
  if (s.agents.empty()) throw ValueError("scenario has no agents");
  if (s.horizon < 1) throw ValueError("horizon must be >= 1");
  if (!(s.epsilon > 0.0) || !std::isfinite(s.epsilon)) throw ValueError("epsilon must be > 0");
  if (s.iterations < 1) throw ValueError("iterations must be >= 1");
  if (s.sim_steps < 1) throw ValueError("sim_steps must be >= 1");
  if (s.alpha && !(*s.alpha > 0.0)) throw ValueError("alpha must be > 0");
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    const std::string who = "agent " + std::to_string(i) + ": ";
    const auto n = a.A.rows();
    const auto m = a.B.cols();
    if (n == 0 || a.A.cols() != n) throw DimensionError(who + "A must be square and non-empty");
    if (a.B.rows() != n) throw DimensionError(who + "B row count must match A");
    if (a.Q.rows() != n || a.Q.cols() != n) throw DimensionError(who + "Q must be n x n");
    if (a.R.rows() != m || a.R.cols() != m) throw DimensionError(who + "R must be m x m");
    if (a.P.rows() != n || a.P.cols() != n) throw DimensionError(who + "P must be n x n");
    auto check_poly = [&](const Polytope& p, Eigen::Index dim, const char* what) {
      if (p.C.cols() != dim || p.C.rows() != p.c.size()) {
        throw DimensionError(who + what + " polytope has inconsistent size");
      }
    };
    check_poly(a.input_poly, m, "input");
    check_poly(a.state_poly, n, "state");
    check_poly(a.terminal_poly, n, "terminal");
    if (a.disturbance_bound.size() != n) throw DimensionError(who + "disturbance bound must have n entries");
    if ((a.disturbance_bound.array() < 0.0).any()) throw ValueError(who + "disturbance bound must be >= 0");
    if (!s.initial_states.empty() && s.initial_states[i].size() != n) {
      throw DimensionError(who + "initial state has wrong size");
    }
    if (!s.targets.empty() && s.targets[i].size() != n) throw DimensionError(who + "target has wrong size");
  }
  if (!s.initial_states.empty() && s.initial_states.size() != s.agents.size()) {
    throw DimensionError("initial_states must have one entry per agent");
  }
  if (!s.targets.empty() && s.targets.size() != s.agents.size()) {
    throw DimensionError("targets must have one entry per agent");
  }
  for (const auto& g : s.coupling.groups) {
    if (g.blocks.empty()) throw ValueError("coupling row group references no agent");
    if (!g.b.allFinite()) throw ValueError("coupling right-hand side must be finite");
  }
  (void)s.coupling.stacked(s.agents);
}

bool ValidationReport::passed() const {
  for (const auto& a : agents)
    if (!a.passed()) return false;
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    auto line = [&](const char* tag, const AssumptionCheck& c) {
      os << "agent " << i << " " << tag << ": " << (c.passed ? "pass" : "FAIL");
      if (!c.detail.empty()) os << " (" << c.detail << ")";
      os << "\n";
    };
    line("(i) stabilizable", a.stabilizable);
    line("(ii) origin interior", a.origin_interior);
    line("(iii) weights positive definite", a.weights_positive);
    line("(iv) terminal decrease", a.terminal_decrease);
  }
  return os.str();
}

ValidationReport validate_assumptions(const Scenario& s, double tol) {
  ValidationReport report;
  for (const auto& a : s.agents) {
    AgentValidation v;
    const MatrixXd Qs = a.Q.rows() == a.n() ? a.Q : MatrixXd::Identity(a.n(), a.n());
    const MatrixXd Rs = a.R.rows() == a.m() ? a.R : MatrixXd::Identity(a.m(), a.m());

    // (i) stabilizability through Riccati convergence, with identity weights so that
    // the test does not depend on (iii).
    DareSolution dare;
    bool have_dare = false;
    try {
      dare = solve_dare(a.A, a.B, MatrixXd::Identity(a.n(), a.n()), MatrixXd::Identity(a.m(), a.m()));
      have_dare = true;
      v.stabilizable = {true, "Riccati iteration converged in " + std::to_string(dare.iterations) + " steps"};
    } catch (const Error& e) {
      v.stabilizable = {false, e.what()};
    }

    // (ii) strict slack at the origin.
    auto strictly_inside = [](const Polytope& p) { return p.rows() == 0 || (p.c.array() > 0.0).all(); };
    const bool u_ok = strictly_inside(a.input_poly);
    const bool x_ok = strictly_inside(a.state_poly);
    v.origin_interior = {u_ok && x_ok, u_ok ? (x_ok ? "" : "origin not interior to state set")
                                            : "origin not interior to input set"};

    // (iii)
    const bool q_pd = is_positive_definite(a.Q);
    const bool r_pd = is_positive_definite(a.R);
    v.weights_positive = {q_pd && r_pd, q_pd ? (r_pd ? "" : "R not positive definite")
                                             : "Q not positive definite"};

    // (iv)
    if (a.terminal_mode == TerminalMode::Equality) {
      v.terminal_decrease = {true, "terminal equality constraint, P = 0"};
    } else if (!have_dare || !q_pd || !r_pd) {
      v.terminal_decrease = {false, "requires (i) and (iii)"};
    } else {
      const MatrixXd K = riccati_gain(a.A, a.B, Rs, a.P);
      const MatrixXd res = terminal_decrease_residual(a.A, a.B, Qs, Rs, a.P, K);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(res, Eigen::EigenvaluesOnly);
      const double worst = es.eigenvalues().maxCoeff();
      const bool p_pd = is_positive_definite(a.P);
      std::ostringstream os;
      os << "max eigenvalue of decrease residual " << worst;
      if (!p_pd) os << "; P not positive definite";
      v.terminal_decrease = {p_pd && worst <= tol, os.str()};
    }
    report.agents.push_back(std::move(v));
  }
  return report;
}

}  // namespace tdmpc
