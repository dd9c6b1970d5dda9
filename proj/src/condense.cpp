#include "tdmpc/condense.hpp"

#include <string>

#include "tdmpc/errors.hpp"

namespace tdmpc {

namespace {

MatrixXd kron_identity(int count, const MatrixXd& block) {
  MatrixXd out = MatrixXd::Zero(count * block.rows(), count * block.cols());
  for (int k = 0; k < count; ++k) out.block(k * block.rows(), k * block.cols(), block.rows(), block.cols()) = block;
  return out;
}

VectorXd repeat(int count, const VectorXd& v) {
  VectorXd out(count * v.size());
  for (int k = 0; k < count; ++k) out.segment(k * v.size(), v.size()) = v;
  return out;
}

}  // namespace

double CondensedAgent::cost(const VectorXd& u, const VectorXd& x) const {
  return 0.5 * u.dot(H * u) + u.dot(G * x) + 0.5 * x.dot(W * x);
}

CondensedAgent condense_agent(const AgentModel& a, int horizon) {
  if (horizon < 1) throw ValueError("condense_agent: horizon must be >= 1");
  const Eigen::Index n = a.n();
  const Eigen::Index m = a.m();
  if (a.A.cols() != n || a.B.rows() != n || a.Q.rows() != n || a.Q.cols() != n || a.R.rows() != m ||
      a.R.cols() != m || a.P.rows() != n || a.P.cols() != n) {
    throw DimensionError("condense_agent: inconsistent model dimensions");
  }
  if (a.input_poly.dim() != m || a.state_poly.dim() != n || a.terminal_poly.dim() != n) {
    throw DimensionError("condense_agent: polytope dimension mismatch");
  }
  const int N = horizon;

  CondensedAgent ca;
  ca.n = n;
  ca.m = m;
  ca.horizon = N;

  // Prediction: xi = Ahat x + Bhat u, blocks k = 0..N.
  ca.Ahat = MatrixXd::Zero((N + 1) * n, n);
  ca.Bhat = MatrixXd::Zero((N + 1) * n, N * m);
  MatrixXd Ak = MatrixXd::Identity(n, n);
  std::vector<MatrixXd> AkB;  // A^k B
  for (int k = 0; k <= N; ++k) {
    ca.Ahat.block(k * n, 0, n, n) = Ak;
    AkB.push_back(Ak * a.B);
    Ak = a.A * Ak;
  }
  for (int k = 1; k <= N; ++k) {
    for (int j = 0; j < k; ++j) ca.Bhat.block(k * n, j * m, n, m) = AkB[static_cast<std::size_t>(k - 1 - j)];
  }

  MatrixXd Hhat = MatrixXd::Zero((N + 1) * n, (N + 1) * n);
  Hhat.topLeftCorner(N * n, N * n) = kron_identity(N, a.Q);
  Hhat.bottomRightCorner(n, n) = a.P;

  const MatrixXd HB = Hhat * ca.Bhat;
  ca.H = ca.Bhat.transpose() * HB + kron_identity(N, a.R);
  ca.H = 0.5 * (ca.H + ca.H.transpose());
  ca.G = HB.transpose() * ca.Ahat;
  ca.W = ca.Ahat.transpose() * Hhat * ca.Ahat;
  ca.W = 0.5 * (ca.W + ca.W.transpose());

  ca.H_llt.compute(ca.H);
  if (ca.H_llt.info() != Eigen::Success) throw ValueError("condense_agent: condensed Hessian is not positive definite");

  // Local constraints.
  const Eigen::Index ru = a.input_poly.rows();
  const Eigen::Index rx = a.state_poly.rows();
  const Eigen::Index rf = a.terminal_poly.rows();
  MatrixXd Lhat = MatrixXd::Zero(N * rx + rf, (N + 1) * n);
  Lhat.topLeftCorner(N * rx, N * n) = kron_identity(N, a.state_poly.C);
  Lhat.bottomRightCorner(rf, n) = a.terminal_poly.C;

  const Eigen::Index rows = N * ru + N * rx + rf;
  ca.C = MatrixXd::Zero(rows, N * m);
  ca.D = MatrixXd::Zero(rows, n);
  ca.c = VectorXd(rows);
  ca.C.topRows(N * ru) = kron_identity(N, a.input_poly.C);
  ca.C.bottomRows(N * rx + rf) = Lhat * ca.Bhat;
  ca.D.bottomRows(N * rx + rf) = Lhat * ca.Ahat;
  ca.c << repeat(N, a.input_poly.c), repeat(N, a.state_poly.c), a.terminal_poly.c;

  ca.E = MatrixXd(0, N * m);
  ca.F = MatrixXd(0, n);
  return ca;
}

VectorXd build_coupling(const CouplingSpec& spec, const std::vector<AgentModel>& models,
                        std::vector<CondensedAgent>& agents, int horizon) {
  if (models.size() != agents.size()) throw DimensionError("build_coupling: model/agent count mismatch");
  const auto st = spec.stacked(models);
  const Eigen::Index p = st.b.size();
  const int N = horizon;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    auto& ca = agents[i];
    if (ca.horizon != N) throw DimensionError("build_coupling: horizon mismatch");
    const MatrixXd& Eu = st.Eu[i];
    const MatrixXd& Ex = st.Ex[i];
    const MatrixXd ExN = kron_identity(N, Ex);
    // Row blocks 1..N of the prediction matrices: predicted states xi_1..xi_N.
    ca.F = ExN * ca.Ahat.bottomRows(N * ca.n);
    ca.E = ExN * ca.Bhat.bottomRows(N * ca.n) + kron_identity(N, Eu);
    if (ca.E.rows() != N * p) throw DimensionError("build_coupling: unexpected row count");
  }
  return repeat(N, st.b);
}

GlobalQP build_global_qp(const Scenario& s) {
  GlobalQP g;
  g.horizon = s.horizon;
  for (const auto& a : s.agents) g.agents.push_back(condense_agent(a, s.horizon));
  g.b = build_coupling(s.coupling, s.agents, g.agents, s.horizon);
  g.stage_rows = s.coupling.rows();
  g.bbar = g.b.head(g.stage_rows);
  return g;
}

Eigen::Index GlobalQP::total_states() const {
  Eigen::Index n = 0;
  for (const auto& a : agents) n += a.n;
  return n;
}

Eigen::Index GlobalQP::total_inputs() const {
  Eigen::Index m = 0;
  for (const auto& a : agents) m += a.horizon * a.m;
  return m;
}

Eigen::Index GlobalQP::state_offset(std::size_t i) const {
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < i; ++k) off += agents[k].n;
  return off;
}

Eigen::Index GlobalQP::input_offset(std::size_t i) const {
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < i; ++k) off += agents[k].horizon * agents[k].m;
  return off;
}

VectorXd GlobalQP::coupling_lhs(const VectorXd& u, const VectorXd& x) const {
  VectorXd acc = VectorXd::Zero(b.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    acc += agents[i].F * agent_state(x, i);
    acc += agents[i].E * agent_inputs(u, i);
  }
  return acc;
}

VectorXd GlobalQP::first_inputs(const VectorXd& u) const {
  Eigen::Index m = 0;
  for (const auto& a : agents) m += a.m;
  VectorXd out(m);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    out.segment(off, agents[i].m) = agent_inputs(u, i).head(agents[i].m);
    off += agents[i].m;
  }
  return out;
}

double eval_condensed_cost(const GlobalQP& g, const VectorXd& u, const VectorXd& x) {
  if (u.size() != g.total_inputs() || x.size() != g.total_states()) {
    throw DimensionError("eval_condensed_cost: stacked vector sizes do not match the problem");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < g.agents.size(); ++i) total += g.agents[i].cost(g.agent_inputs(u, i), g.agent_state(x, i));
  return total;
}

json condensed_to_json(const GlobalQP& g) {
  json doc;
  doc["horizon"] = g.horizon;
  doc["b"] = to_json(g.b);
  doc["agents"] = json::array();
  for (const auto& a : g.agents) {
    doc["agents"].push_back({{"H", to_json(a.H)},
                             {"G", to_json(a.G)},
                             {"W", to_json(a.W)},
                             {"C", to_json(a.C)},
                             {"D", to_json(a.D)},
                             {"c", to_json(a.c)},
                             {"E", to_json(a.E)},
                             {"F", to_json(a.F)},
                             {"Ahat", to_json(a.Ahat)},
                             {"Bhat", to_json(a.Bhat)}});
  }
  return doc;
}

}  // namespace tdmpc
