#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tdmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Halfspace description {z | C z <= c}. An empty row set is the whole space.
struct Polytope {
  MatrixXd C;
  VectorXd c;

  Polytope() = default;
  Polytope(MatrixXd C_, VectorXd c_) : C(std::move(C_)), c(std::move(c_)) {}

  /// Unconstrained polytope in `dim` dimensions.
  static Polytope whole_space(Eigen::Index dim) { return {MatrixXd(0, dim), VectorXd(0)}; }
  /// {z | -upper <= z <= upper}, rows ordered +e_0, -e_0, +e_1, ...
  static Polytope box(const VectorXd& lower, const VectorXd& upper);
  /// {z | z = 0} written as [I; -I] z <= 0.
  static Polytope origin(Eigen::Index dim);

  Eigen::Index rows() const { return C.rows(); }
  Eigen::Index dim() const { return C.cols(); }
  bool contains(const VectorXd& z, double tol = 0.0) const;
};

enum class TerminalMode {
  Polytope,  ///< user-supplied terminal set, invariance taken on faith
  Equality,  ///< x_N = 0, terminal weight P treated as zero
};

/// One agent's dynamics x+ = A x + B u + d, costs and local constraint sets.
struct AgentModel {
  std::string name;
  MatrixXd A;
  MatrixXd B;
  MatrixXd Q;
  MatrixXd R;
  MatrixXd P;
  Polytope input_poly;
  Polytope state_poly;
  Polytope terminal_poly;
  TerminalMode terminal_mode = TerminalMode::Polytope;
  /// Half-widths of the axis-aligned disturbance box.
  VectorXd disturbance_bound;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
};

/// One block of a coupling row group.
struct CouplingBlock {
  int agent = 0;
  MatrixXd Eu;  ///< rows x m_agent
  MatrixXd Ex;  ///< rows x n_agent
};

/// A group of coupling rows sum_i Eu_i u_i + Ex_i x_i <= b sharing a rhs vector.
struct CouplingGroup {
  std::vector<CouplingBlock> blocks;
  VectorXd b;
};

/// Shared-resource constraint across agents.
struct CouplingSpec {
  std::vector<CouplingGroup> groups;

  Eigen::Index rows() const;
  /// Stacked per-agent blocks (Eu_i, Ex_i) with zero blocks for absent agents.
  struct Stacked {
    std::vector<MatrixXd> Eu;
    std::vector<MatrixXd> Ex;
    VectorXd b;
  };
  Stacked stacked(const std::vector<AgentModel>& agents) const;

  /// Expands |S x_i - S x_j| <= b into two one-sided rows per selected coordinate.
  static CouplingGroup abs_difference(int i, int j, const MatrixXd& select, const VectorXd& bound,
                                      Eigen::Index m_i, Eigen::Index m_j);
};

struct Scenario {
  std::string name;
  std::vector<AgentModel> agents;
  CouplingSpec coupling;
  int horizon = 1;
  double epsilon = 1e-3;
  int iterations = 1;
  int sim_steps = 1;
  std::optional<double> alpha;
  std::vector<VectorXd> initial_states;
  std::vector<VectorXd> targets;  ///< empty or one per agent
  std::uint64_t seed = 0;
  /// Content hash of the source document; empty for programmatic scenarios.
  std::string hash;

  Eigen::Index total_states() const;
  Eigen::Index total_inputs() const;
  VectorXd stacked_initial_state() const;
};

/// Coordinate shift x = x_err + x_target, u = u_err + u_target.
struct ShiftRecord {
  std::vector<VectorXd> state_offset;
  std::vector<VectorXd> input_offset;

  bool is_identity() const;
  VectorXd stacked_state_offset() const;
  VectorXd stacked_input_offset() const;
};

struct ShiftedScenario {
  Scenario scenario;  ///< targets at the origin
  ShiftRecord shift;

  /// Maps a stacked trajectory of error-coordinate states back to original coordinates.
  VectorXd unshift_state(const VectorXd& x) const;
  VectorXd unshift_input(const VectorXd& u) const;
  VectorXd shift_state(const VectorXd& x) const;
  VectorXd shift_input(const VectorXd& u) const;
};

/// Moves each agent's target (an equilibrium) to the origin; throws NotEquilibrium.
ShiftedScenario shift_to_target(const Scenario& s);

struct AssumptionCheck {
  bool passed = false;
  std::string detail;
};

struct AgentValidation {
  AssumptionCheck stabilizable;
  AssumptionCheck origin_interior;
  AssumptionCheck weights_positive;
  AssumptionCheck terminal_decrease;

  bool passed() const {
    return stabilizable.passed && origin_interior.passed && weights_positive.passed &&
           terminal_decrease.passed;
  }
};

struct ValidationReport {
  std::vector<AgentValidation> agents;
  bool passed() const;
  std::string summary() const;
};

ValidationReport validate_assumptions(const Scenario& s, double tol = 1e-8);

/// Throws DimensionError / ValueError on malformed scenarios.
void check_dimensions(const Scenario& s);

bool is_symmetric(const MatrixXd& M, double tol = 1e-10);
bool is_positive_definite(const MatrixXd& M);

}  // namespace tdmpc
