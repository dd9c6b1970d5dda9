#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tdmpc/condense.hpp"
#include "tdmpc/coordinator.hpp"
#include "tdmpc/model.hpp"

namespace tdmpc {

/// Blockwise x+ = A_i x_i + B_i u_i + d_i over stacked vectors.
VectorXd plant_step(const VectorXd& x, const VectorXd& u, const VectorXd& d, const std::vector<AgentModel>& models);

enum class DisturbanceKind { Zero, Uniform, ConstantWorst };

DisturbanceKind parse_disturbance_kind(const std::string& kind);
std::string to_string(DisturbanceKind kind);

/// Seeded stream of stacked disturbance samples inside the box [-bound, bound].
class DisturbanceSource {
 public:
  /// `vertex` picks the corner for ConstantWorst (+1/-1 per component; defaults to +1).
  DisturbanceSource(DisturbanceKind kind, VectorXd bound, std::uint64_t seed, VectorXd vertex = {});

  VectorXd next();
  DisturbanceKind kind() const { return kind_; }
  const VectorXd& bound() const { return bound_; }

 private:
  DisturbanceKind kind_;
  VectorXd bound_;
  VectorXd vertex_;
  std::mt19937_64 rng_;
};

DisturbanceSource make_disturbance(const std::string& kind, const VectorXd& bound, std::uint64_t seed);

/// Stacked per-agent disturbance bounds of a scenario, scaled by `scale`.
VectorXd scenario_disturbance_bound(const Scenario& s, double scale = 1.0);

/// Time-indexed closed-loop record. States, inputs and multipliers are kept in the
/// error coordinates used by the controller; `shift` maps them back.
struct ClosedLoopTrace {
  std::vector<VectorXd> x;       ///< x_0 .. x_T (T+1 entries when complete)
  std::vector<VectorXd> u;       ///< applied inputs u_0 .. u_{T-1}
  std::vector<VectorXd> d;       ///< disturbances d_0 .. d_{T-1}
  std::vector<VectorXd> lambda;  ///< multipliers after each sampling period
  std::vector<VectorXd> violation;  ///< (Eu u_t + Ex x_t - bbar)_+ per structured coupling row
  std::vector<double> wall_seconds;
  std::vector<std::vector<AdaIterate>> diagnostics;  ///< optional per-step inner diagnostics

  ShiftRecord shift;
  int iterations = 0;
  double epsilon = 0.0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string scenario_hash;
  std::string scenario_name;
  std::string disturbance;

  bool truncated = false;
  int infeasible_step = -1;  ///< sampling time at which the state left the feasible region
  std::string failure;

  int steps() const { return static_cast<int>(u.size()); }
};

struct SimOptions {
  int iterations = 1;
  int steps = 1;
  double epsilon = 1e-3;
  std::optional<double> alpha;  ///< defaults to 0.99 / L
  std::optional<VectorXd> lambda0;  ///< defaults to zero
  bool record_diagnostics = false;
  LocalQpOptions local;
};

/// Plant-optimizer interconnection: lambda_t = T^l(lambda_{t-1}, x_t),
/// x_{t+1} = A x_t + B q(lambda_t, x_t) + d_t. On an infeasible local problem the trace
/// is returned truncated with `infeasible_step` set.
ClosedLoopTrace simulate_closed_loop(const Scenario& s, const SimOptions& opts, DisturbanceSource& dist);

/// Closed loop under an arbitrary state feedback u = policy(x) in error coordinates.
ClosedLoopTrace simulate_policy(const Scenario& s, int steps, const std::function<VectorXd(const VectorXd&)>& policy,
                                DisturbanceSource& dist);

/// Options from the scenario defaults.
SimOptions sim_options_from(const Scenario& s);

/// Per-row positive part of Eu u + Ex x - bbar on stacked stage values.
VectorXd stage_violation(const CouplingSpec::Stacked& coupling, const std::vector<AgentModel>& models,
                         const VectorXd& x, const VectorXd& u);

/// CSV body (header comment `# tdmpc-trace v1`), states/inputs in original coordinates.
void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace, const std::vector<AgentModel>& models);
json trace_metadata(const ClosedLoopTrace& trace);

}  // namespace tdmpc
