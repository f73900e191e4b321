#pragma once

#include <Eigen/Dense>

#include <array>
#include <optional>

namespace snapopt {

// Minimum enforced segment duration, seconds.
constexpr double kMinSegmentDuration = 0.05;

// Key points the trajectory must pass through, first point is the start and
// last point is the goal. Yaw values at key points are optional; when present
// only the first and last are constrained.
struct KeypointPath {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;
  std::optional<Eigen::VectorXd> yaw;

  int n_keypoints() const { return static_cast<int>(points.rows()); }
  int n_segments() const { return n_keypoints() - 1; }

  // Sum of straight-line chord lengths between consecutive key points.
  double chord_length() const {
    double len = 0.0;
    for (int i = 0; i + 1 < n_keypoints(); ++i) {
      len += (points.row(i + 1) - points.row(i)).norm();
    }
    return len;
  }
};

// Velocity/acceleration/jerk at the trajectory endpoints (rows 0..2), plus
// yaw rates. Endpoint positions come from KeypointPath.
struct BoundaryConditions {
  Eigen::Matrix3d start_derivs = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d end_derivs = Eigen::Matrix3d::Zero();
  double start_yaw_rate = 0.0;
  double end_yaw_rate = 0.0;
};

// Per-segment durations, seconds.
struct TimeAllocation {
  Eigen::VectorXd durations;

  double total() const { return durations.sum(); }
  int n_segments() const { return static_cast<int>(durations.size()); }
};

// Axis-aligned box bounds |r_a(t_s) - chord_a(t_s)| <= half_width at sample
// times inside each segment, where chord is the straight line between the
// segment's key points.
struct CorridorSpec {
  double half_width = 0.1;
  int samples_per_segment = 8;
  std::array<bool, 3> axes = {true, true, true};
};

}  // namespace snapopt
