#include "racelmpc/track.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace racelmpc {

Track::Track(std::vector<TrackSegment> segments, double half_width,
             double s_target, double tail_length)
    : segments_(std::move(segments)),
      half_width_(half_width),
      s_target_(s_target),
      tail_length_(tail_length) {
  if (segments_.empty()) {
    throw std::invalid_argument("track needs at least one segment");
  }
  if (half_width_ <= 0.0) {
    throw std::invalid_argument("track half_width must be positive");
  }
  if (tail_length_ < 0.0) {
    throw std::invalid_argument("track tail_length must be non-negative");
  }

  cumulative_s_.reserve(segments_.size() + 1);
  start_angle_.reserve(segments_.size());
  start_pose_.reserve(segments_.size());

  double s = 0.0;
  TrackPose pose{0.0, 0.0, 0.0};
  for (const TrackSegment& seg : segments_) {
    if (seg.length <= 0.0) {
      throw std::invalid_argument("segment length must be positive");
    }
    if (std::abs(seg.curvature) * seg.length >= 2.0 * std::numbers::pi) {
      throw std::invalid_argument("segment sweeps a full turn or more");
    }
    cumulative_s_.push_back(s);
    start_angle_.push_back(pose.heading);
    start_pose_.push_back(pose);

    const double psi0 = pose.heading;
    const double psi1 = psi0 + seg.curvature * seg.length;
    if (seg.curvature == 0.0) {
      pose.x += seg.length * std::cos(psi0);
      pose.y += seg.length * std::sin(psi0);
    } else {
      pose.x += (std::sin(psi1) - std::sin(psi0)) / seg.curvature;
      pose.y -= (std::cos(psi1) - std::cos(psi0)) / seg.curvature;
    }
    pose.heading = psi1;
    s += seg.length;
  }
  cumulative_s_.push_back(s);
  total_length_ = s;

  if (s_target_ <= 0.0 || s_target_ > total_length_ - tail_length_) {
    throw std::invalid_argument(
        "s_target must lie in (0, total_length - tail_length]");
  }
}

std::size_t Track::segment_index(double s) const {
  if (!(s >= 0.0) || !(s <= total_length_)) {
    throw std::out_of_range("arclength " + std::to_string(s) +
                            " outside track [0, " +
                            std::to_string(total_length_) + "]");
  }
  // Boundary convention: the segment beginning at s wins, so search for
  // the last segment start <= s.  s == total_length maps to the last one.
  std::size_t lo = 0;
  std::size_t hi = segments_.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (cumulative_s_[mid] <= s) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

double Track::curvature(double s) const {
  return segments_[segment_index(s)].curvature;
}

double Track::tangent_angle(double s) const {
  const std::size_t k = segment_index(s);
  return start_angle_[k] + segments_[k].curvature * (s - cumulative_s_[k]);
}

TrackPose Track::centerline(double s) const {
  const std::size_t k = segment_index(s);
  const TrackSegment& seg = segments_[k];
  const TrackPose& origin = start_pose_[k];
  const double ds = s - cumulative_s_[k];
  const double psi0 = origin.heading;
  const double psi = psi0 + seg.curvature * ds;
  TrackPose pose;
  if (seg.curvature == 0.0) {
    pose.x = origin.x + ds * std::cos(psi0);
    pose.y = origin.y + ds * std::sin(psi0);
  } else {
    pose.x = origin.x + (std::sin(psi) - std::sin(psi0)) / seg.curvature;
    pose.y = origin.y - (std::cos(psi) - std::cos(psi0)) / seg.curvature;
  }
  pose.heading = psi;
  return pose;
}

TrackPose Track::frenet_to_cartesian(double s, double e_y,
                                     double e_psi) const {
  TrackPose pose = centerline(s);
  // Left normal of the tangent.
  pose.x += e_y * -std::sin(pose.heading);
  pose.y += e_y * std::cos(pose.heading);
  pose.heading += e_psi;
  return pose;
}

}  // namespace racelmpc
