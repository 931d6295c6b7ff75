#include "racelmpc/track.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

using racelmpc::Track;
using racelmpc::TrackPose;
using racelmpc::TrackSegment;

namespace {

Track corner_track() {
  return Track({{30.0, 0.0}, {31.4, 0.05}, {30.0, 0.0}}, 1.6, 55.0, 20.0);
}

// Independent circle parametrization of the arc segment: the arc starts
// at (30, 0) heading 0 with radius 20 turning left, so its center sits
// at (30, 20).
TrackPose circle_oracle(double s, double e_y, double e_psi) {
  const double radius = 20.0;
  const double phi = (s - 30.0) * 0.05;
  TrackPose pose;
  pose.x = 30.0 + radius * std::sin(phi) - e_y * std::sin(phi);
  pose.y = 20.0 - radius * std::cos(phi) + e_y * std::cos(phi);
  pose.heading = phi + e_psi;
  return pose;
}

}  // namespace

TEST_CASE("curvature is piecewise constant with begin-side boundaries") {
  const Track track = corner_track();
  CHECK(track.curvature(10.0) == 0.0);
  CHECK(track.curvature(45.0) == 0.05);
  CHECK(track.curvature(0.0) == 0.0);
  CHECK(track.curvature(30.0) == 0.05);   // segment beginning at 30 wins
  CHECK(track.curvature(61.4) == 0.0);
  CHECK(track.curvature(track.total_length()) == 0.0);
  CHECK(track.total_length() == doctest::Approx(91.4));
  CHECK_THROWS_AS(track.curvature(-1.0), std::out_of_range);
  CHECK_THROWS_AS(track.curvature(91.5), std::out_of_range);
}

TEST_CASE("track construction rejects bad geometry") {
  CHECK_THROWS_AS(Track({}, 1.6, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Track({{10.0, 0.0}}, -1.0, 5.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(Track({{10.0, 0.0}}, 1.6, 9.0, 5.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(Track({{10.0, 0.7}}, 1.6, 5.0, 0.0),
                  std::invalid_argument);  // full turn in one segment
}

TEST_CASE("frenet_to_cartesian on the straight") {
  const Track track = corner_track();
  const TrackPose origin = track.frenet_to_cartesian(0.0, 0.0, 0.0);
  CHECK(origin.x == doctest::Approx(0.0));
  CHECK(origin.y == doctest::Approx(0.0));
  CHECK(origin.heading == doctest::Approx(0.0));

  const TrackPose offset = track.frenet_to_cartesian(10.0, 1.0, 0.0);
  CHECK(offset.x == doctest::Approx(10.0));
  CHECK(offset.y == doctest::Approx(1.0));
  CHECK(offset.heading == doctest::Approx(0.0));
}

TEST_CASE("frenet_to_cartesian matches the circle oracle inside the arc") {
  const Track track = corner_track();
  for (const double s : {31.0, 40.0, 47.3, 55.0, 61.0}) {
    for (const double e_y : {-1.5, 0.0, 0.7}) {
      const TrackPose got = track.frenet_to_cartesian(s, e_y, 0.12);
      const TrackPose want = circle_oracle(s, e_y, 0.12);
      CHECK(got.x == doctest::Approx(want.x).epsilon(1e-10));
      CHECK(got.y == doctest::Approx(want.y).epsilon(1e-10));
      CHECK(got.heading == doctest::Approx(want.heading).epsilon(1e-10));
    }
  }
}

TEST_CASE("centerline is continuous across segment boundaries") {
  const Track track = corner_track();
  for (const double boundary : {30.0, 61.4}) {
    const TrackPose before =
        track.frenet_to_cartesian(boundary - 1e-9, 0.3, 0.0);
    const TrackPose after =
        track.frenet_to_cartesian(boundary + 1e-9, 0.3, 0.0);
    CHECK(std::abs(before.x - after.x) < 1e-6);
    CHECK(std::abs(before.y - after.y) < 1e-6);
    CHECK(std::abs(before.heading - after.heading) < 1e-6);
  }
}

TEST_CASE("nearest-centerline search recovers (s, e_y)") {
  const Track track = corner_track();
  auto recover = [&](double qx, double qy) {
    // Brute-force scan, then ternary refinement of the squared distance.
    double best_s = 0.0;
    double best_d = 1e300;
    for (double s = 0.0; s <= track.total_length(); s += 0.001) {
      const TrackPose c = track.centerline(s);
      const double d = (c.x - qx) * (c.x - qx) + (c.y - qy) * (c.y - qy);
      if (d < best_d) {
        best_d = d;
        best_s = s;
      }
    }
    double lo = std::max(0.0, best_s - 0.002);
    double hi = std::min(track.total_length(), best_s + 0.002);
    for (int i = 0; i < 80; ++i) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      const TrackPose c1 = track.centerline(m1);
      const TrackPose c2 = track.centerline(m2);
      const double d1 = (c1.x - qx) * (c1.x - qx) + (c1.y - qy) * (c1.y - qy);
      const double d2 = (c2.x - qx) * (c2.x - qx) + (c2.y - qy) * (c2.y - qy);
      if (d1 < d2) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    const double s = 0.5 * (lo + hi);
    const TrackPose c = track.centerline(s);
    const double e_y = -std::sin(c.heading) * (qx - c.x) +
                       std::cos(c.heading) * (qy - c.y);
    return std::pair<double, double>(s, e_y);
  };

  const std::vector<std::pair<double, double>> samples = {
      {5.0, 0.8}, {28.0, -1.2}, {33.0, 1.1}, {45.7, -0.9}, {62.0, 0.4},
      {75.0, -1.5}};
  for (const auto& [s, e_y] : samples) {
    const TrackPose p = track.frenet_to_cartesian(s, e_y, 0.0);
    const auto [s_rec, e_y_rec] = recover(p.x, p.y);
    CHECK(std::abs(s_rec - s) < 1e-6);
    CHECK(std::abs(e_y_rec - e_y) < 1e-6);
  }
}
