#include "racelmpc/vehicle.hpp"

#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "racelmpc/track.hpp"

using racelmpc::ControlInput;
using racelmpc::TireParams;
using racelmpc::Track;
using racelmpc::VehicleParams;
using racelmpc::VehicleState;
using racelmpc::Vector6d;

namespace {

Track straight_track() { return Track({{200.0, 0.0}}, 1.6, 150.0, 10.0); }

Track curved_track(double curvature) {
  return Track({{30.0, 0.0}, {31.4, curvature}, {120.0, 0.0}}, 1.6, 100.0,
               10.0);
}

// Stand-alone RK4 integrator of the same continuous dynamics, written
// directly against the equations and run at twice the resolution.
Vector6d oracle_rhs(const Vector6d& x, const ControlInput& u,
                    const VehicleParams& p, double kappa) {
  const double v_x = std::max(x[0], racelmpc::kVxMin);
  const double alpha_f = std::atan((x[1] + p.lf * x[2]) / v_x) - u.steer;
  const double alpha_r = std::atan((x[1] - p.lr * x[2]) / v_x);
  const double f_yf =
      -p.front.peak_force *
      std::sin(p.front.shape * std::atan(p.front.stiffness * alpha_f));
  const double f_yr =
      -p.rear.peak_force *
      std::sin(p.rear.shape * std::atan(p.rear.stiffness * alpha_r));
  const double denom = 1.0 - x[4] * kappa;
  const double s_dot = (v_x * std::cos(x[3]) - x[1] * std::sin(x[3])) / denom;
  Vector6d dx;
  dx[0] = u.accel + x[1] * x[2] - p.drag * v_x * v_x -
          f_yf * std::sin(u.steer) / p.mass;
  dx[1] = (f_yf * std::cos(u.steer) + f_yr) / p.mass - v_x * x[2];
  dx[2] = (p.lf * f_yf * std::cos(u.steer) - p.lr * f_yr) / p.inertia_z;
  dx[3] = x[2] - kappa * s_dot;
  dx[4] = v_x * std::sin(x[3]) + x[1] * std::cos(x[3]);
  dx[5] = s_dot;
  return dx;
}

VehicleState oracle_step(const VehicleState& state, const ControlInput& u,
                         const VehicleParams& p, const Track& track,
                         double dt, int substeps) {
  const double h = dt / substeps;
  Vector6d x = state.vec();
  for (int i = 0; i < substeps; ++i) {
    const double kappa = track.curvature(x[5]);
    const Vector6d k1 = oracle_rhs(x, u, p, kappa);
    const Vector6d k2 = oracle_rhs(x + 0.5 * h * k1, u, p, kappa);
    const Vector6d k3 = oracle_rhs(x + 0.5 * h * k2, u, p, kappa);
    const Vector6d k4 = oracle_rhs(x + h * k3, u, p, kappa);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    x[0] = std::max(x[0], racelmpc::kVxMin);
  }
  return VehicleState::from_vec(x);
}

}  // namespace

TEST_CASE("tire force is odd with a bounded asymptote") {
  const TireParams tire{10.0, 1.9, 6000.0};
  CHECK(racelmpc::tire_lateral_force(0.0, tire) == 0.0);
  CHECK(racelmpc::tire_lateral_force(0.2, tire) ==
        doctest::Approx(-racelmpc::tire_lateral_force(-0.2, tire)));

  const double asymptote = 6000.0 * std::sin(1.9 * M_PI / 2.0);
  CHECK(racelmpc::tire_lateral_force(1e9, tire) ==
        doctest::Approx(asymptote).epsilon(1e-6));
  CHECK(std::abs(racelmpc::tire_lateral_force(5.0, tire)) <= 6000.0);

  // Direct formula evaluation at a moderate slip angle.
  const double want = 6000.0 * std::sin(1.9 * std::atan(10.0 * 0.05));
  CHECK(racelmpc::tire_lateral_force(0.05, tire) == doctest::Approx(want));
}

TEST_CASE("straight-line coasting keeps the vehicle symmetric") {
  const Track track = straight_track();
  VehicleParams params;
  params.drag = 0.0;
  VehicleState state;
  state.v_x = 10.0;
  const VehicleState next =
      racelmpc::plant_step(state, {0.0, 0.0}, params, track, 0.1);
  CHECK(next.v_y == doctest::Approx(0.0));
  CHECK(next.yaw_rate == doctest::Approx(0.0));
  CHECK(next.e_y == doctest::Approx(0.0));
  CHECK(next.s == doctest::Approx(1.0));
  CHECK(next.v_x == doctest::Approx(10.0));
}

TEST_CASE("plant matches an independent half-step RK4 oracle") {
  const Track track = curved_track(0.05);
  const VehicleParams params;
  VehicleState state;
  state.v_x = 12.0;
  state.v_y = 0.4;
  state.yaw_rate = 0.3;
  state.e_psi = 0.06;
  state.e_y = -0.8;
  state.s = 38.0;
  const ControlInput input{1.5, 0.08};

  const VehicleState got = racelmpc::plant_step(state, input, params, track,
                                                0.1, 10);
  const VehicleState want = oracle_step(state, input, params, track, 0.1, 20);
  const Vector6d err = (got.vec() - want.vec()).cwiseAbs();
  for (int i = 0; i < 6; ++i) {
    CHECK(err[i] < 1e-6);
  }
}

TEST_CASE("mirrored inputs give the mirrored trajectory") {
  const Track left = curved_track(0.05);
  const Track right = curved_track(-0.05);
  const VehicleParams params;

  VehicleState a;
  a.v_x = 11.0;
  a.v_y = 0.25;
  a.yaw_rate = 0.2;
  a.e_psi = 0.04;
  a.e_y = 0.6;
  a.s = 20.0;
  VehicleState b = a;
  b.v_y = -a.v_y;
  b.yaw_rate = -a.yaw_rate;
  b.e_psi = -a.e_psi;
  b.e_y = -a.e_y;

  ControlInput ua{1.0, 0.1};
  ControlInput ub{1.0, -0.1};
  for (int step = 0; step < 40; ++step) {
    a = racelmpc::plant_step(a, ua, params, left, 0.1);
    b = racelmpc::plant_step(b, ub, params, right, 0.1);
    CHECK(a.v_x == b.v_x);
    CHECK(a.v_y == -b.v_y);
    CHECK(a.yaw_rate == -b.yaw_rate);
    CHECK(a.e_psi == -b.e_psi);
    CHECK(a.e_y == -b.e_y);
    CHECK(a.s == b.s);
  }
}

TEST_CASE("drag alone never speeds the vehicle up") {
  const Track track = straight_track();
  VehicleParams params;
  params.drag = 0.002;
  VehicleState state;
  state.v_x = 20.0;
  for (int step = 0; step < 100; ++step) {
    const VehicleState next =
        racelmpc::plant_step(state, {0.0, 0.0}, params, track, 0.1);
    CHECK(next.v_x <= state.v_x);
    state = next;
  }
}

TEST_CASE("plant step is deterministic") {
  const Track track = curved_track(0.05);
  const VehicleParams params;
  VehicleState state;
  state.v_x = 9.0;
  state.v_y = -0.2;
  state.yaw_rate = 0.15;
  state.e_psi = -0.03;
  state.e_y = 0.4;
  state.s = 35.0;
  const ControlInput input{-0.7, 0.05};
  const VehicleState first =
      racelmpc::plant_step(state, input, params, track, 0.1);
  const VehicleState second =
      racelmpc::plant_step(state, input, params, track, 0.1);
  CHECK(first.vec() == second.vec());
}

TEST_CASE("plant faults on the curvilinear singularity") {
  // A tight arc with radius 2 m: offsetting past the center breaks the
  // frame.
  const Track tight =
      Track({{5.0, 0.0}, {6.0, 0.5}, {5.0, 0.0}}, 3.0, 12.0, 2.0);
  VehicleParams params;
  VehicleState state;
  state.v_x = 5.0;
  state.e_y = 2.5;
  state.s = 8.0;
  CHECK_THROWS_AS(racelmpc::plant_step(state, {0.0, 0.0}, params, tight, 0.1),
                  std::domain_error);
}

TEST_CASE("plant faults when leaving the recorded track") {
  const Track track = straight_track();
  VehicleParams params;
  VehicleState state;
  state.v_x = 10.0;
  state.s = 199.9;
  CHECK_THROWS_AS(racelmpc::plant_step(state, {3.0, 0.0}, params, track, 0.1),
                  std::out_of_range);
}
