#pragma once

#include <memory>
#include <vector>

#include "racelmpc/models.hpp"
#include "racelmpc/nlp.hpp"
#include "racelmpc/safeset.hpp"
#include "racelmpc/track.hpp"
#include "racelmpc/vehicle.hpp"

namespace racelmpc {

struct LmpcConfig {
  int horizon = 10;
  double dt = 0.1;              // s
  double e_y_bound = 1.6;       // m, |e_y| box on the predicted states
  double v_x_max = 60.0;        // m/s, keeps the program bounded
  double rate_eps = 1e-4;       // input-rate regularization weight
  double tol_feasibility = 1e-4;
  double tol_stationarity = 1e-3;
  int max_sqp_iterations = 40;
};

/// Decision-variable layout: N+1 states, then N inputs, then lambda.
inline int ocp_state_index(int /*horizon*/, int k) { return 6 * k; }
inline int ocp_input_index(int horizon, int k) {
  return 6 * (horizon + 1) + 2 * k;
}
inline int ocp_lambda_index(int horizon) {
  return 6 * (horizon + 1) + 2 * horizon;
}
inline int ocp_num_vars(int horizon) { return ocp_lambda_index(horizon) + 1; }

/// The relaxed finite-horizon problem around one measured state, ready
/// for the SQP solver.
struct Ocp {
  Nlp nlp;
  int horizon = 0;
  std::shared_ptr<const struct OcpData> data;
};

struct OcpSolution {
  std::vector<ControlInput> inputs;  // N entries
  std::vector<VehicleState> states;  // N+1 entries
  double lambda = 1.0;
  SolveStatus status = SolveStatus::kMaxIter;
  double objective = 0.0;
  double max_violation = 0.0;
  int sqp_iterations = 0;
  std::vector<MeritStep> merit_history;

  Eigen::VectorXd pack(int horizon) const;
  static OcpSolution unpack(const Eigen::VectorXd& z, int horizon);
};

/// Assembles the multiple-shooting program: dynamics equalities through
/// the learned predictor, the initial condition, input and e_y boxes,
/// and the terminal tie to the lambda-blended local polynomials with
/// the blended cost-to-go as objective. The track must outlive the Ocp.
Ocp build_ocp(const VehicleState& x_t, const ThetaParams& theta,
              const LocalApproximation& approx, const LmpcConfig& config,
              const VehicleParams& params, const Track& track);

/// Runs the SQP solver from a warm start (or a conservative default).
OcpSolution solve_ocp(const Ocp& ocp, const OcpSolution* warm_start);

struct ControlDecision {
  ControlInput input;
  OcpSolution solution;  // on fallback: the shifted previous solution
  bool fallback = false;
};

/// One receding-horizon step: shift the previous solution into a warm
/// start, solve, and apply the first input. A failed solve falls back
/// to the next input of the previous solution; with nothing to fall
/// back on it throws std::runtime_error.
ControlDecision control_step(const VehicleState& x_t, const ThetaParams& theta,
                             const LocalApproximation& approx,
                             const LmpcConfig& config,
                             const VehicleParams& params, const Track& track,
                             const OcpSolution* previous,
                             const OcpSolution* initial_guess = nullptr);

/// Rolls inputs forward with the one-step predictor to build a
/// dynamically consistent guess.
OcpSolution rollout_guess(const VehicleState& x_t,
                          std::vector<ControlInput> inputs, double lambda,
                          const ThetaParams& theta, const LmpcConfig& config,
                          const Track& track);

}  // namespace racelmpc
