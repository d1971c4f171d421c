#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "apfl/geometry.hpp"

namespace apfl {

enum class CellCode : std::uint8_t { Free = 0, Unexplored = 1, Occupied = 2 };

struct MapParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Global occupancy map. Immutable once built; safe to share across workers.
/// Row 0 is the minimum-y row; cell (ix, iy) covers the world rectangle
/// [origin + ix*res, origin + (ix+1)*res) x [origin + iy*res, origin + (iy+1)*res).
class OccupancyGrid {
 public:
  OccupancyGrid(int width, int height, double resolution, Pose origin,
                std::vector<CellCode> cells);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Pose& origin() const { return origin_; }
  const std::vector<CellCode>& cells() const { return cells_; }

  CellCode at(int ix, int iy) const { return cells_[static_cast<size_t>(iy) * width_ + ix]; }
  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && ix < width_ && iy >= 0 && iy < height_;
  }
  bool in_bounds_world(double x, double y) const;

  /// Cell index containing a world point (floor). No bounds check.
  void world_to_cell(double x, double y, int& ix, int& iy) const {
    ix = static_cast<int>(std::floor((x - origin_.x) / resolution_));
    iy = static_cast<int>(std::floor((y - origin_.y) / resolution_));
  }
  /// World coordinates of a cell center.
  void cell_center(int ix, int iy, double& x, double& y) const {
    x = origin_.x + (ix + 0.5) * resolution_;
    y = origin_.y + (iy + 0.5) * resolution_;
  }

  /// Cell containing the point, clamped to the border.
  void world_to_cell_clamped(double x, double y, int& ix, int& iy) const;

  /// Euclidean distance from a world point to a cell's area (0 inside).
  double point_to_cell_distance(double x, double y, int ix, int iy) const;

  /// Disc at (x, y) with the given radius overlaps some Occupied cell area.
  bool disc_collides(double x, double y, double radius) const;

  /// Free cell whose robot disc at the cell center clears all Occupied cells.
  bool traversable(int ix, int iy, double robot_radius) const;

 private:
  int width_, height_;
  double resolution_;
  Pose origin_;
  std::vector<CellCode> cells_;
};

/// Per-cell Euclidean distance (meters) to the nearest Occupied cell center.
class DistanceField {
 public:
  DistanceField(int width, int height, double resolution, Pose origin,
                std::vector<double> dist)
      : width_(width), height_(height), resolution_(resolution), origin_(origin),
        dist_(std::move(dist)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int ix, int iy) const { return dist_[static_cast<size_t>(iy) * width_ + ix]; }

  /// Value at the cell containing the world point, clamped to the border.
  double sample(double x, double y) const;

  /// Whether the world point falls inside the mapped area.
  bool contains(double x, double y) const {
    return x >= origin_.x && y >= origin_.y && x < origin_.x + width_ * resolution_ &&
           y < origin_.y + height_ * resolution_;
  }

 private:
  int width_, height_;
  double resolution_;
  Pose origin_;
  std::vector<double> dist_;
};

OccupancyGrid load_map(const std::string& path);
OccupancyGrid parse_map(const std::string& text, const std::string& name = "<string>");
std::string serialize_map(const OccupancyGrid& grid);
void save_map(const OccupancyGrid& grid, const std::string& path);

/// Range along the ray to the first Occupied cell boundary, clamped to
/// max_range. Throws if the origin lies outside the grid.
double raycast(const OccupancyGrid& grid, const Pose& from, double angle, double max_range);

/// Exact Euclidean distance transform. Throws if the grid has no Occupied cell.
DistanceField distance_transform(const OccupancyGrid& grid);

/// Uniform pose over the traversable area: position uniform within a uniformly
/// chosen traversable cell, heading uniform over [-pi, pi).
Pose sample_traversable_pose(const OccupancyGrid& grid, Rng& rng, double robot_radius);

/// Indices of all traversable cells, row-major order.
std::vector<std::pair<int, int>> traversable_cells(const OccupancyGrid& grid,
                                                   double robot_radius);

}  // namespace apfl
