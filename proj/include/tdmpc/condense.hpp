#pragma once

#include <vector>

#include <Eigen/Dense>

#include "tdmpc/io.hpp"
#include "tdmpc/model.hpp"

namespace tdmpc {

/// Horizon-N condensed data for one agent.
///
/// The cost is f(u, x) = 1/2 [u; x]' [H G; G' W] [u; x] and the local constraints
/// read D x + C u <= c. Local rows are ordered: inputs for every stage, then
/// state rows for stages 0..N-1, then the terminal rows.
struct CondensedAgent {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  int horizon = 0;

  MatrixXd H;
  MatrixXd G;
  MatrixXd W;
  MatrixXd C;
  MatrixXd D;
  VectorXd c;
  /// Coupling blocks: rows are Np stage-major coupling rows.
  MatrixXd E;
  MatrixXd F;
  MatrixXd Ahat;
  MatrixXd Bhat;

  /// Cholesky factor of H, computed once.
  Eigen::LLT<MatrixXd> H_llt;

  /// Extracts the first-stage input from an input trajectory.
  VectorXd first_input(const VectorXd& u) const { return u.head(m); }
  double cost(const VectorXd& u, const VectorXd& x) const;
};

/// All agents of one problem plus the stacked coupling right-hand side.
struct GlobalQP {
  std::vector<CondensedAgent> agents;
  VectorXd b;          ///< 1_N kron bbar
  VectorXd bbar;       ///< per-stage coupling bound
  Eigen::Index stage_rows = 0;  ///< p, rows per stage
  int horizon = 0;

  std::size_t num_agents() const { return agents.size(); }
  Eigen::Index coupling_rows() const { return b.size(); }
  Eigen::Index total_states() const;
  Eigen::Index total_inputs() const;  ///< N * sum m_i
  Eigen::Index state_offset(std::size_t i) const;
  Eigen::Index input_offset(std::size_t i) const;  ///< offset into the stacked input trajectory

  /// Splits stacked vectors into per-agent views.
  VectorXd agent_state(const VectorXd& x, std::size_t i) const { return x.segment(state_offset(i), agents[i].n); }
  VectorXd agent_inputs(const VectorXd& u, std::size_t i) const {
    return u.segment(input_offset(i), agents[i].horizon * agents[i].m);
  }

  /// sum_i F_i x_i + E_i u_i in fixed agent order.
  VectorXd coupling_lhs(const VectorXd& u, const VectorXd& x) const;
  /// Stacked first-stage inputs of a stacked trajectory.
  VectorXd first_inputs(const VectorXd& u) const;
};

/// Builds prediction matrices, cost blocks and local constraint rows for one agent.
CondensedAgent condense_agent(const AgentModel& a, int horizon);

/// Coupling blocks for every agent: E_i = (I_N kron Ex_i) Bhat_i[1:N] + I_N kron Eu_i and
/// F_i = (I_N kron Ex_i) Ahat_i[1:N], where [1:N] selects predicted states 1..N.
/// Writes into each agent's E/F and returns b = 1_N kron bbar.
VectorXd build_coupling(const CouplingSpec& spec, const std::vector<AgentModel>& models,
                        std::vector<CondensedAgent>& agents, int horizon);

GlobalQP build_global_qp(const Scenario& s);

/// sum_i 1/2 ||(u_i, x_i)||^2_{M_i}.
double eval_condensed_cost(const GlobalQP& g, const VectorXd& u, const VectorXd& x);

json condensed_to_json(const GlobalQP& g);

}  // namespace tdmpc
