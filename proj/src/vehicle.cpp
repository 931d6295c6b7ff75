#include "racelmpc/vehicle.hpp"

#include <cmath>
#include <stdexcept>

namespace racelmpc {

double tire_lateral_force(double slip_angle, const TireParams& tire) {
  return tire.peak_force *
         std::sin(tire.shape * std::atan(tire.stiffness * slip_angle));
}

namespace {

Vector6d dynamics_rhs(const Vector6d& x, const ControlInput& u,
                      const VehicleParams& p, double kappa) {
  const double v_x = std::max(x[0], kVxMin);
  const double v_y = x[1];
  const double yaw_rate = x[2];
  const double e_psi = x[3];
  const double e_y = x[4];

  const double denom = 1.0 - e_y * kappa;
  if (denom <= 0.0) {
    throw std::domain_error("curvilinear singularity: 1 - e_y*kappa <= 0");
  }

  // Slip angles; the lateral force opposes the slip.
  const double alpha_f = std::atan((v_y + p.lf * yaw_rate) / v_x) - u.steer;
  const double alpha_r = std::atan((v_y - p.lr * yaw_rate) / v_x);
  const double f_yf = tire_lateral_force(-alpha_f, p.front);
  const double f_yr = tire_lateral_force(-alpha_r, p.rear);

  const double cos_d = std::cos(u.steer);
  const double sin_d = std::sin(u.steer);
  const double s_dot =
      (v_x * std::cos(e_psi) - v_y * std::sin(e_psi)) / denom;

  Vector6d dx;
  dx[0] = u.accel + v_y * yaw_rate -
          p.drag * v_x * v_x * (x[0] < 0.0 ? -1.0 : 1.0) -
          f_yf * sin_d / p.mass;
  dx[1] = (f_yf * cos_d + f_yr) / p.mass - v_x * yaw_rate;
  dx[2] = (p.lf * f_yf * cos_d - p.lr * f_yr) / p.inertia_z;
  dx[3] = yaw_rate - kappa * s_dot;
  dx[4] = v_x * std::sin(e_psi) + v_y * std::cos(e_psi);
  dx[5] = s_dot;
  return dx;
}

}  // namespace

VehicleState plant_step(const VehicleState& state, const ControlInput& input,
                        const VehicleParams& params, const Track& track,
                        double dt, int substeps) {
  if (!(dt > 0.0) || substeps < 1) {
    throw std::invalid_argument("plant_step needs dt > 0 and substeps >= 1");
  }
  const double h = dt / substeps;
  Vector6d x = state.vec();
  for (int i = 0; i < substeps; ++i) {
    // Curvature held at the sub-step start; sub-steps are short enough
    // that a segment boundary shifts it by at most one sample.
    const double kappa = track.curvature(x[5]);
    const Vector6d k1 = dynamics_rhs(x, input, params, kappa);
    const Vector6d k2 = dynamics_rhs(x + 0.5 * h * k1, input, params, kappa);
    const Vector6d k3 = dynamics_rhs(x + 0.5 * h * k2, input, params, kappa);
    const Vector6d k4 = dynamics_rhs(x + h * k3, input, params, kappa);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x[0] = std::max(x[0], kVxMin);
  }
  if (!x.allFinite()) {
    throw std::domain_error("plant state diverged");
  }
  // Final range check; curvature() above already rejects s < 0.
  track.curvature(x[5]);
  return VehicleState::from_vec(x);
}

}  // namespace racelmpc
