// Independent reference implementations used by the unit, acceptance and
// selftest suites. Deliberately brute-force; none of these share code with
// the implementations they check.
#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "apfl/belief.hpp"
#include "apfl/pfilter.hpp"
#include "apfl/worldmap.hpp"

namespace apfl::oracle {

/// Step the ray at fine increments; first step inside an Occupied cell wins.
inline double raycast_fine_step(const OccupancyGrid& grid, const Pose& from, double angle,
                                double max_range, double step_divisor = 10.0) {
  const double step = grid.resolution() / step_divisor;
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (double t = 0.0; t <= max_range; t += step) {
    const double x = from.x + t * dx, y = from.y + t * dy;
    int ix, iy;
    grid.world_to_cell(x, y, ix, iy);
    if (!grid.in_bounds(ix, iy)) return max_range;
    if (grid.at(ix, iy) == CellCode::Occupied) return t;
  }
  return max_range;
}

/// Compare a raycast result against the fine-step oracle within one cell of
/// tolerance. Where the coarse march steps over a corner sliver of an
/// occupied cell, refine the step until the chord is resolved.
inline bool raycast_matches_oracle(const OccupancyGrid& grid, const Pose& from, double angle,
                                   double max_range, double result) {
  for (double divisor = 10.0; divisor <= 1e5; divisor *= 10.0) {
    const double fine = raycast_fine_step(grid, from, angle, max_range, divisor);
    if (std::abs(result - fine) <= grid.resolution()) return true;
    if (result > fine) return false;  // the implementation missed a hit
  }
  return false;
}

/// All-pairs minimum distance to occupied cell centers, in meters.
inline std::vector<double> edt_bruteforce(const OccupancyGrid& grid) {
  std::vector<std::pair<int, int>> occ;
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix)
      if (grid.at(ix, iy) == CellCode::Occupied) occ.emplace_back(ix, iy);
  std::vector<double> out(static_cast<size_t>(grid.width()) * grid.height());
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [ox, oy] : occ) {
        const double dx = ix - ox, dy = iy - oy;
        best = std::min(best, dx * dx + dy * dy);
      }
      out[static_cast<size_t>(iy) * grid.width() + ix] = std::sqrt(best) * grid.resolution();
    }
  return out;
}

/// Uniform-cost search over the same 8-connected traversable graph as the
/// planner; returns the optimal cost or infinity.
inline double dijkstra_cost(const OccupancyGrid& grid, int fx, int fy, int tx, int ty,
                            double robot_radius) {
  const int w = grid.width(), h = grid.height();
  auto trav = [&](int x, int y) { return grid.traversable(x, y, robot_radius); };
  if (!trav(fx, fy) || !trav(tx, ty)) return std::numeric_limits<double>::infinity();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<size_t>(w) * h, inf);
  auto index = [&](int x, int y) { return static_cast<size_t>(y) * w + x; };
  using Node = std::pair<double, size_t>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  dist[index(fx, fy)] = 0.0;
  open.emplace(0.0, index(fx, fy));
  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!open.empty()) {
    const auto [d, ci] = open.top();
    open.pop();
    if (d > dist[ci] + 1e-12) continue;
    const int cx = static_cast<int>(ci % w), cy = static_cast<int>(ci / w);
    for (int k = 0; k < 8; ++k) {
      const int nx = cx + dx8[k], ny = cy + dy8[k];
      if (nx < 0 || nx >= w || ny < 0 || ny >= h || !trav(nx, ny)) continue;
      const bool diag = k >= 4;
      if (diag && (!trav(cx, ny) || !trav(nx, cy))) continue;
      const double nd = d + (diag ? std::sqrt(2.0) : 1.0);
      if (nd < dist[index(nx, ny)] - 1e-12) {
        dist[index(nx, ny)] = nd;
        open.emplace(nd, index(nx, ny));
      }
    }
  }
  return dist[index(tx, ty)];
}

/// Per-cell inverse mapping for local crops: world point of each output cell
/// center under the attention pose, then nearest global cell.
inline bool crop_cell_source(const OccupancyGrid& grid, const Pose& pose, int size, int ix,
                             int iy, int& gx, int& gy) {
  const int c = size / 2;
  const double res = grid.resolution();
  const double u = (ix - c) * res, v = (iy - c) * res;
  const double wx = pose.x + std::cos(pose.phi) * u - std::sin(pose.phi) * v;
  const double wy = pose.y + std::sin(pose.phi) * u + std::cos(pose.phi) * v;
  grid.world_to_cell(wx, wy, gx, gy);
  return grid.in_bounds(gx, gy);
}

/// A deterministic random grid with a sprinkling of all three codes.
inline OccupancyGrid random_grid(Rng& rng, int w, int h, double resolution,
                                 double p_occupied = 0.15, double p_unexplored = 0.1) {
  std::vector<CellCode> cells(static_cast<size_t>(w) * h, CellCode::Free);
  for (auto& c : cells) {
    const double u = rng.uniform();
    if (u < p_occupied)
      c = CellCode::Occupied;
    else if (u < p_occupied + p_unexplored)
      c = CellCode::Unexplored;
  }
  // Guarantee at least one occupied cell.
  cells[rng.uniform_index(cells.size())] = CellCode::Occupied;
  return OccupancyGrid(w, h, resolution, Pose{}, std::move(cells));
}

}  // namespace apfl::oracle
