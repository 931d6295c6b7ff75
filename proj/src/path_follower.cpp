#include "racelmpc/path_follower.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace racelmpc {

PathFollower::PathFollower(const PathFollowerGains& gains,
                           const VehicleParams& params, const Track& track,
                           double v_ref)
    : gains_(gains), params_(params), track_(&track), v_ref_(v_ref) {
  if (v_ref < kVxMin) {
    throw std::invalid_argument("path follower v_ref below the speed floor");
  }
}

ControlInput PathFollower::compute(const VehicleState& state, double dt) {
  const double kappa = track_->curvature(state.s);
  const double feedforward = params_.wheelbase() * kappa;
  double attenuation = 1.0;
  if (state.v_x > v_ref_) {
    attenuation = (v_ref_ / state.v_x) * (v_ref_ / state.v_x);
  }
  const double feedback =
      attenuation * (-gains_.k_e_y * state.e_y - gains_.k_e_psi * state.e_psi);
  const double steer = std::clamp(feedback + feedforward, -params_.steer_max,
                                  params_.steer_max);

  const double speed_error = v_ref_ - state.v_x;
  double accel = gains_.kp_speed * speed_error +
                 gains_.ki_speed * speed_integral_;
  if (accel > params_.accel_max) {
    accel = params_.accel_max;
  } else if (accel < params_.accel_min) {
    accel = params_.accel_min;
  } else {
    speed_integral_ += speed_error * dt;  // integrate only when unsaturated
  }
  return {accel, steer};
}

std::pair<std::vector<VehicleState>, std::vector<ControlInput>>
run_path_follower(const Track& track, const VehicleParams& params,
                  double v_ref, const PathFollowerGains& gains,
                  const VehicleState& start, double dt, double s_stop,
                  std::size_t max_steps) {
  PathFollower follower(gains, params, track, v_ref);
  std::vector<VehicleState> states{start};
  std::vector<ControlInput> inputs;
  while (states.back().s <= s_stop) {
    if (states.size() > max_steps) {
      throw std::runtime_error(
          "path follower failed to reach the target arclength");
    }
    const ControlInput input = follower.compute(states.back(), dt);
    VehicleState next;
    try {
      next = plant_step(states.back(), input, params, track, dt);
    } catch (const std::exception& err) {
      throw std::runtime_error(
          std::string("path follower diverged: ") + err.what());
    }
    inputs.push_back(input);
    states.push_back(next);
  }
  return {std::move(states), std::move(inputs)};
}

}  // namespace racelmpc
