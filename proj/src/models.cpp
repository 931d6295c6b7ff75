#include "racelmpc/models.hpp"

#include <cmath>
#include <stdexcept>

namespace racelmpc {

FeatureVectors features(const VehicleState& state, const ControlInput& input) {
  const double v_x = std::max(state.v_x, kVxMin);
  FeatureVectors f;
  f.v_x << state.v_x, state.v_y * state.yaw_rate, input.accel;
  f.v_y << state.v_y / v_x, state.yaw_rate * v_x, state.yaw_rate / v_x,
      input.steer;
  f.yaw << state.yaw_rate / v_x, state.v_y / v_x, input.steer;
  return f;
}

VehicleState g_bar(const VehicleState& state, const ControlInput& /*input*/,
                   double dt, const Track& track) {
  const double kappa = track.curvature(state.s);
  const double denom = 1.0 - state.e_y * kappa;
  if (denom <= 0.0) {
    throw std::domain_error("curvilinear singularity: 1 - e_y*kappa <= 0");
  }
  const double cos_e = std::cos(state.e_psi);
  const double sin_e = std::sin(state.e_psi);
  const double s_rate = (state.v_x * cos_e - state.v_y * sin_e) / denom;

  VehicleState next = state;
  next.e_psi += (state.yaw_rate - kappa * s_rate) * dt;
  next.e_y += (state.v_x * sin_e + state.v_y * cos_e) * dt;
  next.s += s_rate * dt;
  return next;
}

VehicleState predict(const VehicleState& state, const ControlInput& input,
                     const ThetaParams& theta, double dt, const Track& track) {
  VehicleState next = g_bar(state, input, dt, track);
  const FeatureVectors f = features(state, input);
  next.v_x += f.v_x.dot(theta.v_x);
  next.v_y += f.v_y.dot(theta.v_y);
  next.yaw_rate += f.yaw.dot(theta.yaw);
  return next;
}

void predict_jacobians(const VehicleState& state,
                       const ControlInput& /*input*/,
                       const ThetaParams& theta, double dt, const Track& track,
                       Eigen::Matrix<double, 6, 6>& d_state,
                       Eigen::Matrix<double, 6, 2>& d_input) {
  const double kappa = track.curvature(state.s);
  const double denom = 1.0 - state.e_y * kappa;
  if (denom <= 0.0) {
    throw std::domain_error("curvilinear singularity: 1 - e_y*kappa <= 0");
  }
  const double cos_e = std::cos(state.e_psi);
  const double sin_e = std::sin(state.e_psi);
  const double s_rate = (state.v_x * cos_e - state.v_y * sin_e) / denom;

  // Partials of the arclength rate.
  const double ds_dvx = cos_e / denom;
  const double ds_dvy = -sin_e / denom;
  const double ds_depsi = (-state.v_x * sin_e - state.v_y * cos_e) / denom;
  const double ds_dey = s_rate * kappa / denom;

  d_state.setIdentity();
  d_input.setZero();

  // e_psi row.
  d_state(3, 0) = -dt * kappa * ds_dvx;
  d_state(3, 1) = -dt * kappa * ds_dvy;
  d_state(3, 2) = dt;
  d_state(3, 3) = 1.0 - dt * kappa * ds_depsi;
  d_state(3, 4) = -dt * kappa * ds_dey;
  // e_y row.
  d_state(4, 0) = dt * sin_e;
  d_state(4, 1) = dt * cos_e;
  d_state(4, 3) = dt * (state.v_x * cos_e - state.v_y * sin_e);
  // s row.
  d_state(5, 0) = dt * ds_dvx;
  d_state(5, 1) = dt * ds_dvy;
  d_state(5, 3) = dt * ds_depsi;
  d_state(5, 4) = dt * ds_dey;

  // Learned-correction rows. Below the speed floor the features are
  // constant in v_x, so that partial is zeroed.
  const double v_x = std::max(state.v_x, kVxMin);
  const double inv_vx = 1.0 / v_x;
  const bool clamped = state.v_x < kVxMin;

  const Eigen::Vector3d& t1 = theta.v_x;
  const Eigen::Vector4d& t2 = theta.v_y;
  const Eigen::Vector3d& t3 = theta.yaw;

  d_state(0, 0) += t1[0];
  d_state(0, 1) += t1[1] * state.yaw_rate;
  d_state(0, 2) += t1[1] * state.v_y;
  d_input(0, 0) = t1[2];

  const double dvy_dvx =
      -t2[0] * state.v_y * inv_vx * inv_vx + t2[1] * state.yaw_rate -
      t2[2] * state.yaw_rate * inv_vx * inv_vx;
  d_state(1, 0) += clamped ? 0.0 : dvy_dvx;
  d_state(1, 1) += t2[0] * inv_vx;
  d_state(1, 2) += t2[1] * v_x + t2[2] * inv_vx;
  d_input(1, 1) = t2[3];

  const double dyaw_dvx =
      -(t3[0] * state.yaw_rate + t3[1] * state.v_y) * inv_vx * inv_vx;
  d_state(2, 0) += clamped ? 0.0 : dyaw_dvx;
  d_state(2, 1) += t3[1] * inv_vx;
  d_state(2, 2) += t3[0] * inv_vx;
  d_input(2, 1) = t3[2];
}

}  // namespace racelmpc
