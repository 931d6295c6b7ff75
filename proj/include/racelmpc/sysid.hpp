#pragma once

#include <Eigen/Core>

#include <span>

#include "racelmpc/models.hpp"
#include "racelmpc/safeset.hpp"
#include "racelmpc/track.hpp"
#include "racelmpc/vehicle.hpp"

namespace racelmpc {

struct SysIdConfig {
  int history = 50;          // transitions taken before the nearest index
  int lookahead = 50;        // transitions taken after the nearest index
  int past_iterations = 2;   // stored laps mined per estimate
  double ridge = 1e-6;       // Tikhonov factor for the channel solves
  Vector6d distance_weights = Vector6d::Ones();  // nearest-index metric
};

/// Per-channel least-squares data: residuals of the kinematic predictor
/// against the matching feature rows.
struct RegressionProblem {
  Eigen::MatrixXd phi_v_x;  // rows x 3
  Eigen::MatrixXd phi_v_y;  // rows x 4
  Eigen::MatrixXd phi_yaw;  // rows x 3
  Eigen::VectorXd y_v_x;
  Eigen::VectorXd y_v_y;
  Eigen::VectorXd y_yaw;

  Eigen::Index rows() const { return y_v_x.size(); }
};

/// Index of the stored state closest to x (weighted Euclidean over the
/// full state); ties break to the smaller index. Throws
/// std::invalid_argument on an empty trajectory.
std::size_t nearest_index(const VehicleState& x,
                          std::span<const VehicleState> trajectory,
                          const Vector6d& weights = Vector6d::Ones());

/// Assembles the local regression data around x_t: the last
/// min(history+1, available) transitions of the running lap plus, for
/// each of the last past_iterations stored laps, the transitions with
/// source index in [nearest - history, nearest + lookahead], clipped to
/// the valid range. Throws std::invalid_argument when any channel ends
/// up with fewer rows than coefficients.
RegressionProblem build_regression(const VehicleState& x_t,
                                   std::span<const VehicleState> current_states,
                                   std::span<const ControlInput> current_inputs,
                                   const SafeSet& safeset,
                                   const SysIdConfig& config, double dt,
                                   const Track& track);

/// Ridge least squares per channel via QR on the augmented system.
/// Throws std::invalid_argument on non-finite data or too few rows.
ThetaParams solve_theta(const RegressionProblem& problem, double ridge = 0.0);

}  // namespace racelmpc
