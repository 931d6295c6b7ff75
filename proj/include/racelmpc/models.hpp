#pragma once

#include <Eigen/Core>

#include "racelmpc/track.hpp"
#include "racelmpc/vehicle.hpp"

namespace racelmpc {

/// Regression coefficients of the learned correction, one vector per
/// velocity channel (v_x, v_y, yaw rate).
struct ThetaParams {
  Eigen::Vector3d v_x = Eigen::Vector3d::Zero();
  Eigen::Vector4d v_y = Eigen::Vector4d::Zero();
  Eigen::Vector3d yaw = Eigen::Vector3d::Zero();
};

/// Feature vectors of the learned correction, derived from the dynamic
/// bicycle model:
///   v_x channel: [v_x, v_y*yaw_rate, a]
///   v_y channel: [v_y/v_x, yaw_rate*v_x, yaw_rate/v_x, delta]
///   yaw channel: [yaw_rate/v_x, v_y/v_x, delta]
struct FeatureVectors {
  Eigen::Vector3d v_x;
  Eigen::Vector4d v_y;
  Eigen::Vector3d yaw;
};

FeatureVectors features(const VehicleState& state, const ControlInput& input);

/// Known part of the one-step predictor: a single Euler step of the
/// curvilinear kinematics. The velocity states pass through unchanged.
/// Throws std::domain_error when 1 - e_y*kappa(s) <= 0.
VehicleState g_bar(const VehicleState& state, const ControlInput& input,
                   double dt, const Track& track);

/// Full one-step predictor: g_bar plus the learned correction on the
/// three velocity states.
VehicleState predict(const VehicleState& state, const ControlInput& input,
                     const ThetaParams& theta, double dt, const Track& track);

/// Analytic Jacobians of predict with respect to state and input.
/// Curvature is treated as locally constant in s.
void predict_jacobians(const VehicleState& state, const ControlInput& input,
                       const ThetaParams& theta, double dt, const Track& track,
                       Eigen::Matrix<double, 6, 6>& d_state,
                       Eigen::Matrix<double, 6, 2>& d_input);

}  // namespace racelmpc
