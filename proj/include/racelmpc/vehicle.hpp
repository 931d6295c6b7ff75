#pragma once

#include <Eigen/Core>

#include "racelmpc/track.hpp"

namespace racelmpc {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Longitudinal speed floor. Keeps slip angles and the v_x divisions in
/// the feature vectors finite.
inline constexpr double kVxMin = 0.1;

/// Vehicle state in the curvilinear frame:
/// [v_x, v_y, yaw_rate, e_psi, e_y, s].
struct VehicleState {
  double v_x = 0.0;       // longitudinal velocity, m/s
  double v_y = 0.0;       // lateral velocity, m/s
  double yaw_rate = 0.0;  // rad/s
  double e_psi = 0.0;     // heading error to the centerline tangent, rad
  double e_y = 0.0;       // signed lateral offset (left positive), m
  double s = 0.0;         // arclength progress, m

  Vector6d vec() const {
    Vector6d v;
    v << v_x, v_y, yaw_rate, e_psi, e_y, s;
    return v;
  }
  static VehicleState from_vec(const Vector6d& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
};

struct ControlInput {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad, left positive
};

/// Simplified Pacejka magic-formula lateral characteristic per axle.
struct TireParams {
  double stiffness = 10.0;   // B
  double shape = 1.9;        // C
  double peak_force = 8000;  // D, N
};

struct VehicleParams {
  double mass = 1900.0;       // kg
  double inertia_z = 2800.0;  // kg m^2
  double lf = 1.25;           // CoG to front axle, m
  double lr = 1.55;           // CoG to rear axle, m
  double drag = 0.0015;       // quadratic drag coefficient, 1/m
  TireParams front{10.0, 1.9, 8800.0};
  TireParams rear{11.0, 1.9, 7900.0};
  double accel_min = -6.0;  // m/s^2
  double accel_max = 3.0;   // m/s^2
  double steer_max = 0.45;  // rad

  double wheelbase() const { return lf + lr; }
};

/// D*sin(C*atan(B*alpha)): odd in alpha, |F| <= D.
double tire_lateral_force(double slip_angle, const TireParams& tire);

/// Ground-truth plant update: dynamic single-track model with Pacejka
/// lateral forces, integrated with RK4 sub-steps in the curvilinear
/// frame. Throws std::domain_error when 1 - e_y*kappa(s) <= 0 and
/// std::out_of_range when s leaves the track.
VehicleState plant_step(const VehicleState& state, const ControlInput& input,
                        const VehicleParams& params, const Track& track,
                        double dt, int substeps = 10);

}  // namespace racelmpc
