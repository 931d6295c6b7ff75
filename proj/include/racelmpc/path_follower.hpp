#pragma once

#include <utility>
#include <vector>

#include "racelmpc/track.hpp"
#include "racelmpc/vehicle.hpp"

namespace racelmpc {

struct PathFollowerGains {
  double k_e_y = 0.5;    // steering per meter of lateral offset
  double k_e_psi = 1.5;  // steering per radian of heading error
  double kp_speed = 1.5;
  double ki_speed = 0.3;
};

/// Centerline tracker: curvature feedforward plus proportional lateral
/// feedback, with PI speed control toward v_ref. Above v_ref the
/// lateral feedback is attenuated quadratically so the same controller
/// can catch the vehicle at racing speed after the finish line.
class PathFollower {
 public:
  PathFollower(const PathFollowerGains& gains, const VehicleParams& params,
               const Track& track, double v_ref);

  ControlInput compute(const VehicleState& state, double dt);
  void reset() { speed_integral_ = 0.0; }

 private:
  PathFollowerGains gains_;
  VehicleParams params_;
  const Track* track_;
  double v_ref_;
  double speed_integral_ = 0.0;
};

/// Drives the plant from `start` until s exceeds s_stop. Throws
/// std::runtime_error when tracking diverges (step budget exhausted or
/// the plant faults) and std::invalid_argument for v_ref below the
/// speed floor.
std::pair<std::vector<VehicleState>, std::vector<ControlInput>>
run_path_follower(const Track& track, const VehicleParams& params,
                  double v_ref, const PathFollowerGains& gains,
                  const VehicleState& start, double dt, double s_stop,
                  std::size_t max_steps = 200000);

}  // namespace racelmpc
