#include "apfl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apfl {

Pose integrate_unicycle(const Pose& p, double v, double w, double dt) {
  constexpr double kEps = 1e-9;
  Pose out;
  if (std::abs(w) > kEps) {
    out.x = p.x + (v / w) * (std::sin(p.phi + w * dt) - std::sin(p.phi));
    out.y = p.y - (v / w) * (std::cos(p.phi + w * dt) - std::cos(p.phi));
  } else {
    out.x = p.x + v * dt * std::cos(p.phi);
    out.y = p.y + v * dt * std::sin(p.phi);
  }
  out.phi = wrap_angle(p.phi + w * dt);
  return out;
}

LidarScan sense(const Pose& pose, const OccupancyGrid& grid, int n_beams, double fov,
                double max_range) {
  if (n_beams < 2) throw std::invalid_argument("sense: n_beams must be >= 2");
  LidarScan scan;
  scan.n_beams = n_beams;
  scan.fov = fov;
  scan.max_range = max_range;
  scan.ranges.resize(n_beams);
  for (int i = 0; i < n_beams; ++i)
    scan.ranges[i] = raycast(grid, pose, pose.phi + scan.beam_angle(i), max_range);
  return scan;
}

namespace {

// Advance along the arc, stopping at the first colliding sub-interval.
// Returns the reachable pose and whether contact occurred.
std::pair<Pose, bool> sweep_collide(const Pose& start, double v, double w, double dt,
                                    const OccupancyGrid& grid, double radius) {
  const double arc = std::abs(v) * dt;
  const double sub = grid.resolution() * 0.25;
  const int n_sub = std::max(1, static_cast<int>(std::ceil(arc / sub)));

  double t_ok = 0.0;
  for (int i = 1; i <= n_sub; ++i) {
    const double t = dt * i / n_sub;
    const Pose p = integrate_unicycle(start, v, w, t);
    if (grid.disc_collides(p.x, p.y, radius)) {
      // Bisect between the last clear time and the first colliding time.
      double lo = t_ok, hi = t;
      for (int it = 0; it < 40 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Pose pm = integrate_unicycle(start, v, w, mid);
        if (grid.disc_collides(pm.x, pm.y, radius))
          hi = mid;
        else
          lo = mid;
      }
      Pose contact = integrate_unicycle(start, v, w, lo);
      // Keep the commanded heading change; the base still rotates against the wall.
      contact.phi = wrap_angle(start.phi + w * dt);
      return {contact, true};
    }
    t_ok = t;
  }
  return {integrate_unicycle(start, v, w, dt), false};
}

}  // namespace

Observation step(SimState& state, const OccupancyGrid& grid, Action action,
                 const SimConfig& cfg, Rng& rng) {
  if (cfg.dt <= 0.0) throw std::invalid_argument("step: dt must be positive");
  action.v = std::clamp(action.v, -cfg.v_max, cfg.v_max);
  action.w = std::clamp(action.w, -cfg.w_max, cfg.w_max);

  const Pose prev = state.true_pose;
  auto [next, collided] = sweep_collide(prev, action.v, action.w, cfg.dt, grid, cfg.robot_radius);
  state.true_pose = next;
  ++state.step_index;

  Observation obs;
  obs.collided = collided;

  // Odometry reports the actual (possibly truncated) motion in the previous
  // robot frame, plus per-step Gaussian noise.
  double dx, dy;
  prev.to_local(next.x, next.y, dx, dy);
  obs.odom.dx = dx + (cfg.odom_noise_xy > 0.0 ? rng.normal(0.0, cfg.odom_noise_xy) : 0.0);
  obs.odom.dy = dy + (cfg.odom_noise_xy > 0.0 ? rng.normal(0.0, cfg.odom_noise_xy) : 0.0);
  obs.odom.dphi = wrap_angle(next.phi - prev.phi) +
                  (cfg.odom_noise_phi > 0.0 ? rng.normal(0.0, cfg.odom_noise_phi) : 0.0);

  obs.scan = sense(state.true_pose, grid, cfg.n_beams, cfg.lidar_fov, cfg.lidar_max_range);
  return obs;
}

OccupancyGrid scan_to_local_occupancy(const LidarScan& scan, int size, double resolution) {
  if (size % 2 == 0) throw std::invalid_argument("scan_to_local_occupancy: size must be odd");
  const int c = size / 2;
  std::vector<CellCode> cells(static_cast<size_t>(size) * size, CellCode::Unexplored);
  auto idx = [&](int ix, int iy) { return static_cast<size_t>(iy) * size + ix; };
  auto in = [&](int ix, int iy) { return ix >= 0 && ix < size && iy >= 0 && iy < size; };

  std::vector<std::pair<int, int>> endpoints;
  for (int b = 0; b < scan.n_beams; ++b) {
    const double r = scan.ranges[b];
    const double a = scan.beam_angle(b);
    const double ex = r * std::cos(a), ey = r * std::sin(a);
    const int eix = c + static_cast<int>(std::floor(ex / resolution + 0.5));
    const int eiy = c + static_cast<int>(std::floor(ey / resolution + 0.5));

    // March cell centers along the beam up to (but excluding) the endpoint cell.
    const int n_steps = static_cast<int>(std::floor(r / resolution)) + 1;
    for (int s = 0; s < n_steps; ++s) {
      const double d = s * resolution;
      if (d >= r) break;
      const int ix = c + static_cast<int>(std::floor(d * std::cos(a) / resolution + 0.5));
      const int iy = c + static_cast<int>(std::floor(d * std::sin(a) / resolution + 0.5));
      if ((ix != eix || iy != eiy) && in(ix, iy)) cells[idx(ix, iy)] = CellCode::Free;
    }
    if (r < scan.max_range && in(eix, eiy)) endpoints.emplace_back(eix, eiy);
  }
  // Occupied endpoints win over Free marks from other beams.
  for (auto [ix, iy] : endpoints) cells[idx(ix, iy)] = CellCode::Occupied;

  Pose origin;
  origin.x = -(c + 0.5) * resolution;
  origin.y = -(c + 0.5) * resolution;
  return OccupancyGrid(size, size, resolution, origin, std::move(cells));
}

}  // namespace apfl
