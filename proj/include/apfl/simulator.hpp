#pragma once

#include <vector>

#include "apfl/geometry.hpp"
#include "apfl/worldmap.hpp"

namespace apfl {

/// Base velocity command; clamped on ingestion.
struct Action {
  double v = 0.0;  // m/s
  double w = 0.0;  // rad/s
};

struct LidarScan {
  int n_beams = 0;
  double fov = 0.0;       // radians, centered on the robot heading
  double max_range = 0.0;  // meters
  std::vector<double> ranges;

  /// Beam angle relative to the robot heading.
  double beam_angle(int i) const {
    return fov * (static_cast<double>(i) / (n_beams - 1) - 0.5);
  }
};

/// Relative motion in the previous robot frame, with injected noise.
struct OdomDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dphi = 0.0;
};

struct Observation {
  LidarScan scan;
  OdomDelta odom;
  bool collided = false;
};

struct SimConfig {
  double v_max = 0.5;          // m/s
  double w_max = kPi / 2.0;    // rad/s
  double robot_radius = 0.18;  // m
  double dt = 1.0 / 1.7;       // s, control period
  int n_beams = 60;
  double lidar_fov = 240.0 * kPi / 180.0;
  double lidar_max_range = 10.0;
  double odom_noise_xy = 0.0;   // m, std per step
  double odom_noise_phi = 0.0;  // rad, std per step
};

struct SimState {
  Pose true_pose;
  int step_index = 0;
};

/// Integrate the unicycle model, truncate at the first disc-obstacle contact,
/// and report noisy odometry of the actual motion plus the LiDAR scan taken
/// at the new pose.
Observation step(SimState& state, const OccupancyGrid& grid, Action action,
                 const SimConfig& cfg, Rng& rng);

/// Scan from the current true pose; pure per-beam ray casting.
LidarScan sense(const Pose& pose, const OccupancyGrid& grid, int n_beams, double fov,
                double max_range);

/// Exact unicycle arc for one interval; no collision handling.
Pose integrate_unicycle(const Pose& p, double v, double w, double dt);

/// Egocentric occupancy image of a scan: Free along each beam, Occupied at
/// endpoints under max_range, Unexplored elsewhere. Robot at the center cell,
/// heading along +x. size must be odd.
OccupancyGrid scan_to_local_occupancy(const LidarScan& scan, int size, double resolution);

}  // namespace apfl
