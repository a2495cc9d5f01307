#pragma once

#include <vector>

namespace edecoh {

/// Sampled classical path of one electron over the surface. Heights are
/// measured from the surface plane; time starts at the surface entrance.
struct TrajectoryRecord {
  std::vector<double> time;    // s
  std::vector<double> height;  // m, y(t)
  std::vector<double> z;       // m, v t
  bool absorbed = false;
  double detector_y = 0.0;        // m, relative to the surface plane
  double entrance_height = 0.0;   // m
  double entrance_vy = 0.0;       // m/s
  double exit_vy = 0.0;           // m/s
  double min_height = 0.0;        // m
  double energy_drift = 0.0;      // |dE| / (K / y_min), image-charge runs only

  double duration() const { return time.empty() ? 0.0 : time.back() - time.front(); }

  /// Constant-height record spanning [0, duration] with n samples.
  static TrajectoryRecord constant_height(double height, double duration,
                                          double speed, int samples = 2);
};

}  // namespace edecoh
