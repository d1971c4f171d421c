#include "apfl/worldmap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace apfl {

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Pose origin,
                             std::vector<CellCode> cells)
    : width_(width), height_(height), resolution_(resolution), origin_(origin),
      cells_(std::move(cells)) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
  if (resolution <= 0.0) throw std::invalid_argument("resolution must be positive");
  if (cells_.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("cell count does not match dimensions");
  if (origin.phi != 0.0)
    throw std::invalid_argument("rotated map origins are not supported");
}

bool OccupancyGrid::in_bounds_world(double x, double y) const {
  int ix, iy;
  world_to_cell(x, y, ix, iy);
  return in_bounds(ix, iy);
}

void OccupancyGrid::world_to_cell_clamped(double x, double y, int& ix, int& iy) const {
  world_to_cell(x, y, ix, iy);
  ix = std::clamp(ix, 0, width_ - 1);
  iy = std::clamp(iy, 0, height_ - 1);
}

double OccupancyGrid::point_to_cell_distance(double x, double y, int ix, int iy) const {
  const double x0 = origin_.x + ix * resolution_, x1 = x0 + resolution_;
  const double y0 = origin_.y + iy * resolution_, y1 = y0 + resolution_;
  const double dx = std::max({x0 - x, 0.0, x - x1});
  const double dy = std::max({y0 - y, 0.0, y - y1});
  return std::hypot(dx, dy);
}

bool OccupancyGrid::disc_collides(double x, double y, double radius) const {
  int cx, cy;
  world_to_cell(x, y, cx, cy);
  const int reach = static_cast<int>(std::ceil(radius / resolution_)) + 1;
  for (int iy = cy - reach; iy <= cy + reach; ++iy) {
    for (int ix = cx - reach; ix <= cx + reach; ++ix) {
      if (!in_bounds(ix, iy)) continue;
      if (at(ix, iy) != CellCode::Occupied) continue;
      if (point_to_cell_distance(x, y, ix, iy) < radius) return true;
    }
  }
  return false;
}

bool OccupancyGrid::traversable(int ix, int iy, double robot_radius) const {
  if (!in_bounds(ix, iy) || at(ix, iy) != CellCode::Free) return false;
  double cx, cy;
  cell_center(ix, iy, cx, cy);
  return !disc_collides(cx, cy, robot_radius);
}

namespace {

// Tokenizer that tracks line/column for parse diagnostics.
struct TokenStream {
  const std::string& text;
  size_t pos = 0;
  int line = 1, col = 1;

  void advance() {
    if (text[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_space_and_comments() {
    while (pos < text.size()) {
      const char c = text[pos];
      if (c == '#') {
        while (pos < text.size() && text[pos] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  bool next(std::string& out, int& tok_line, int& tok_col) {
    skip_space_and_comments();
    if (pos >= text.size()) return false;
    tok_line = line;
    tok_col = col;
    out.clear();
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '#') {
      out.push_back(text[pos]);
      advance();
    }
    return true;
  }
};

[[noreturn]] void parse_fail(const std::string& name, int line, int col, const std::string& what) {
  std::ostringstream os;
  os << name << ":" << line << ":" << col << ": " << what;
  throw MapParseError(os.str());
}

}  // namespace

OccupancyGrid parse_map(const std::string& text, const std::string& name) {
  TokenStream ts{text};
  std::string tok;
  int tl = 1, tc = 1;

  auto expect = [&](const char* what) -> std::string {
    if (!ts.next(tok, tl, tc)) parse_fail(name, ts.line, ts.col, std::string("unexpected end of file, expected ") + what);
    return tok;
  };

  if (expect("magic 'OGMAP'") != "OGMAP") parse_fail(name, tl, tc, "bad magic, expected 'OGMAP'");
  if (expect("format version '1'") != "1") parse_fail(name, tl, tc, "unsupported format version");

  auto parse_int = [&](const char* what) {
    expect(what);
    try {
      size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      parse_fail(name, tl, tc, std::string("invalid integer for ") + what + ": '" + tok + "'");
    }
  };
  auto parse_double = [&](const char* what) {
    expect(what);
    try {
      size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      parse_fail(name, tl, tc, std::string("invalid number for ") + what + ": '" + tok + "'");
    }
  };

  const int width = parse_int("width");
  const int height = parse_int("height");
  if (width <= 0 || height <= 0) parse_fail(name, tl, tc, "dimensions must be positive");
  const double resolution = parse_double("resolution");
  if (resolution <= 0.0) parse_fail(name, tl, tc, "resolution must be positive");
  Pose origin;
  origin.x = parse_double("origin_x");
  origin.y = parse_double("origin_y");
  origin.phi = parse_double("origin_phi");
  if (origin.phi != 0.0) parse_fail(name, tl, tc, "origin_phi must be 0 (rotated maps unsupported)");

  std::vector<CellCode> cells;
  cells.reserve(static_cast<size_t>(width) * height);
  for (int row = 0; row < height; ++row) {
    for (int colix = 0; colix < width; ++colix) {
      if (!ts.next(tok, tl, tc))
        parse_fail(name, ts.line, ts.col,
                   "unexpected end of file in cell data at row " + std::to_string(row) +
                       " col " + std::to_string(colix));
      if (tok.size() != 1 || (tok[0] != '0' && tok[0] != '1' && tok[0] != '2'))
        parse_fail(name, tl, tc,
                   "invalid cell code '" + tok + "' at row " + std::to_string(row) + " col " +
                       std::to_string(colix) + ", expected 0, 1 or 2");
      cells.push_back(static_cast<CellCode>(tok[0] - '0'));
    }
  }
  if (ts.next(tok, tl, tc)) parse_fail(name, tl, tc, "trailing token after cell data: '" + tok + "'");

  return OccupancyGrid(width, height, resolution, origin, std::move(cells));
}

OccupancyGrid load_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapParseError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str(), path);
}

std::string serialize_map(const OccupancyGrid& grid) {
  std::ostringstream os;
  os << "OGMAP 1\n";
  os << grid.width() << " " << grid.height() << " ";
  const auto fmt = [&](double v) {
    std::ostringstream num;
    num.precision(17);
    num << v;
    return num.str();
  };
  os << fmt(grid.resolution()) << " " << fmt(grid.origin().x) << " " << fmt(grid.origin().y)
     << " " << fmt(grid.origin().phi) << "\n";
  for (int iy = 0; iy < grid.height(); ++iy) {
    for (int ix = 0; ix < grid.width(); ++ix) {
      if (ix) os << " ";
      os << static_cast<int>(grid.at(ix, iy));
    }
    os << "\n";
  }
  return os.str();
}

void save_map(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open file for writing");
  out << serialize_map(grid);
}

double raycast(const OccupancyGrid& grid, const Pose& from, double angle, double max_range) {
  int ix, iy;
  grid.world_to_cell(from.x, from.y, ix, iy);
  if (!grid.in_bounds(ix, iy)) throw std::invalid_argument("raycast origin outside grid");
  if (grid.at(ix, iy) == CellCode::Occupied) return 0.0;

  const double dx = std::cos(angle), dy = std::sin(angle);
  const double res = grid.resolution();

  // Amanatides-Woo voxel traversal. tMax* is the ray parameter at which the
  // ray crosses the next cell boundary along each axis.
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  const double t_delta_x = step_x ? res / std::abs(dx) : inf;
  const double t_delta_y = step_y ? res / std::abs(dy) : inf;

  const double cell_x0 = grid.origin().x + ix * res;
  const double cell_y0 = grid.origin().y + iy * res;
  double t_max_x = inf, t_max_y = inf;
  if (step_x > 0) t_max_x = (cell_x0 + res - from.x) / dx;
  if (step_x < 0) t_max_x = (cell_x0 - from.x) / dx;
  if (step_y > 0) t_max_y = (cell_y0 + res - from.y) / dy;
  if (step_y < 0) t_max_y = (cell_y0 - from.y) / dy;

  double t = 0.0;
  while (t <= max_range) {
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      ix += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      iy += step_y;
    }
    if (t > max_range) break;
    if (!grid.in_bounds(ix, iy)) break;
    if (grid.at(ix, iy) == CellCode::Occupied) return t;
  }
  return max_range;
}

namespace {

// Felzenszwalb & Huttenlocher 1-D squared distance transform. Cells with no
// source use a large finite sentinel; any real occupied cell dominates it.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n) {
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + q * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

constexpr double kEdtSentinel = 1e12;

}  // namespace

DistanceField distance_transform(const OccupancyGrid& grid) {
  const int w = grid.width(), h = grid.height();
  bool any_occupied = false;
  std::vector<double> sq(static_cast<size_t>(w) * h, kEdtSentinel);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix)
      if (grid.at(ix, iy) == CellCode::Occupied) {
        sq[static_cast<size_t>(iy) * w + ix] = 0.0;
        any_occupied = true;
      }
  if (!any_occupied)
    throw std::invalid_argument("distance_transform: grid has no Occupied cell");

  // Columns, then rows.
  std::vector<double> f(std::max(w, h)), d(std::max(w, h));
  for (int ix = 0; ix < w; ++ix) {
    for (int iy = 0; iy < h; ++iy) f[iy] = sq[static_cast<size_t>(iy) * w + ix];
    edt_1d(f, d, h);
    for (int iy = 0; iy < h; ++iy) sq[static_cast<size_t>(iy) * w + ix] = d[iy];
  }
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) f[ix] = sq[static_cast<size_t>(iy) * w + ix];
    edt_1d(f, d, w);
    for (int ix = 0; ix < w; ++ix) sq[static_cast<size_t>(iy) * w + ix] = d[ix];
  }

  std::vector<double> dist(sq.size());
  const double res = grid.resolution();
  for (size_t i = 0; i < sq.size(); ++i) dist[i] = std::sqrt(sq[i]) * res;
  return DistanceField(w, h, res, grid.origin(), std::move(dist));
}

double DistanceField::sample(double x, double y) const {
  int ix = static_cast<int>(std::floor((x - origin_.x) / resolution_));
  int iy = static_cast<int>(std::floor((y - origin_.y) / resolution_));
  ix = std::clamp(ix, 0, width_ - 1);
  iy = std::clamp(iy, 0, height_ - 1);
  return at(ix, iy);
}

std::vector<std::pair<int, int>> traversable_cells(const OccupancyGrid& grid,
                                                   double robot_radius) {
  std::vector<std::pair<int, int>> out;
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix)
      if (grid.traversable(ix, iy, robot_radius)) out.emplace_back(ix, iy);
  return out;
}

Pose sample_traversable_pose(const OccupancyGrid& grid, Rng& rng, double robot_radius) {
  const auto cells = traversable_cells(grid, robot_radius);
  if (cells.empty())
    throw std::invalid_argument("sample_traversable_pose: grid has no traversable cell");
  const auto [ix, iy] = cells[rng.uniform_index(cells.size())];
  const double res = grid.resolution();
  Pose p;
  p.x = grid.origin().x + (ix + rng.uniform()) * res;
  p.y = grid.origin().y + (iy + rng.uniform()) * res;
  p.phi = wrap_angle(rng.uniform(-kPi, kPi));
  return p;
}

}  // namespace apfl
