#pragma once

#include <vector>

namespace racelmpc {

/// One piece of the centerline with constant curvature (0 = straight,
/// positive = left turn). Lengths in meters, curvature in 1/m.
struct TrackSegment {
  double length = 0.0;
  double curvature = 0.0;
};

/// Cartesian pose of a point on (or offset from) the centerline.
struct TrackPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Open track described in curvilinear coordinates: an ordered list of
/// constant-curvature segments starting at the origin with heading 0.
/// The finish line sits at s_target; the geometry keeps going for at
/// least tail_length past it so trajectories can record a runout.
///
/// Immutable after construction; safe for concurrent reads.
class Track {
 public:
  Track(std::vector<TrackSegment> segments, double half_width,
        double s_target, double tail_length);

  double total_length() const { return total_length_; }
  double half_width() const { return half_width_; }
  double s_target() const { return s_target_; }
  double tail_length() const { return tail_length_; }
  const std::vector<TrackSegment>& segments() const { return segments_; }

  /// Curvature of the segment containing s. Piecewise constant; at an
  /// interior boundary the segment beginning there wins. Throws
  /// std::out_of_range for s outside [0, total_length].
  double curvature(double s) const;

  /// Heading of the centerline tangent at s (exact integral of the
  /// piecewise-constant curvature).
  double tangent_angle(double s) const;

  /// Centerline point at s.
  TrackPose centerline(double s) const;

  /// Cartesian pose of the point offset e_y along the left normal at s,
  /// with heading e_psi relative to the tangent.
  TrackPose frenet_to_cartesian(double s, double e_y, double e_psi) const;

 private:
  std::size_t segment_index(double s) const;

  std::vector<TrackSegment> segments_;
  std::vector<double> cumulative_s_;   // segment start arclengths, plus total
  std::vector<double> start_angle_;    // tangent angle at each segment start
  std::vector<TrackPose> start_pose_;  // centerline point at each segment start
  double total_length_ = 0.0;
  double half_width_ = 0.0;
  double s_target_ = 0.0;
  double tail_length_ = 0.0;
};

}  // namespace racelmpc
