#include "apfl/belief.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

namespace apfl {

BeliefMap project_particles(const ParticleSet& ps, const OccupancyGrid& grid) {
  if (!ps.normalized) throw std::invalid_argument("project_particles: set not normalized");
  BeliefMap bm;
  bm.width = grid.width();
  bm.height = grid.height();
  bm.data.assign(static_cast<size_t>(bm.width) * bm.height * 4, 0.0);
  for (int iy = 0; iy < bm.height; ++iy)
    for (int ix = 0; ix < bm.width; ++ix)
      bm.at(ix, iy, 0) = 0.5 * static_cast<double>(grid.at(ix, iy));
  for (const auto& p : ps.particles) {
    int ix, iy;
    grid.world_to_cell_clamped(p.pose.x, p.pose.y, ix, iy);
    const double w = std::exp(p.log_weight);
    bm.at(ix, iy, 1) += w;
    bm.at(ix, iy, 2) += w * std::sin(p.pose.phi);
    bm.at(ix, iy, 3) += w * std::cos(p.pose.phi);
  }
  return bm;
}

std::vector<Pose> extract_modes(const ParticleSet& ps, int k, const ModeConfig& mode_cfg) {
  if (!ps.normalized) throw std::invalid_argument("extract_modes: set not normalized");
  if (k < 1) throw std::invalid_argument("extract_modes: k must be >= 1");
  if (k == 1) return {estimate_pose(ps)};

  struct Bin {
    double w = 0.0, x = 0.0, y = 0.0, s = 0.0, c = 0.0;
  };
  std::map<std::tuple<long, long, long>, Bin> bins;
  for (const auto& p : ps.particles) {
    const long bx = static_cast<long>(std::floor(p.pose.x / mode_cfg.bin_xy));
    const long by = static_cast<long>(std::floor(p.pose.y / mode_cfg.bin_xy));
    const long bp = static_cast<long>(std::floor((p.pose.phi + kPi) / mode_cfg.bin_phi));
    auto& b = bins[{bx, by, bp}];
    const double w = std::exp(p.log_weight);
    b.w += w;
    b.x += w * p.pose.x;
    b.y += w * p.pose.y;
    b.s += w * std::sin(p.pose.phi);
    b.c += w * std::cos(p.pose.phi);
  }

  std::vector<std::pair<std::tuple<long, long, long>, Bin>> ranked(bins.begin(), bins.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.w != b.second.w) return a.second.w > b.second.w;
    return a.first < b.first;  // deterministic tie-break
  });

  std::vector<Pose> modes;
  const int n = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int i = 0; i < n; ++i) {
    const Bin& b = ranked[i].second;
    if (b.w <= 0.0) break;
    modes.push_back(Pose{b.x / b.w, b.y / b.w, wrap_angle(std::atan2(b.s, b.c))});
  }
  return modes;
}

LocalBelief extract_local_belief(const BeliefMap& bm, const OccupancyGrid& grid,
                                 const Pose& attend, int size) {
  LocalBelief lb;
  lb.size = size;
  lb.data.assign(static_cast<size_t>(size) * size * 4, 0.0);
  const int c = size / 2;
  const double res = grid.resolution();
  const double cphi = std::cos(attend.phi), sphi = std::sin(attend.phi);
  for (int iy = 0; iy < size; ++iy) {
    for (int ix = 0; ix < size; ++ix) {
      const double u = (ix - c) * res, v = (iy - c) * res;
      const double wx = attend.x + cphi * u - sphi * v;
      const double wy = attend.y + sphi * u + cphi * v;
      int gx, gy;
      grid.world_to_cell(wx, wy, gx, gy);
      if (!grid.in_bounds(gx, gy)) continue;
      lb.at(ix, iy, 0) = bm.at(gx, gy, 0);
      lb.at(ix, iy, 1) = bm.at(gx, gy, 1);
      // Rotate the (sin, cos) sums into the attention frame: the weighted
      // sums of sin/cos(phi - phi_attend) follow from the angle-difference
      // identities applied to the stored global-frame sums.
      const double s = bm.at(gx, gy, 2), co = bm.at(gx, gy, 3);
      lb.at(ix, iy, 2) = s * cphi - co * sphi;
      lb.at(ix, iy, 3) = co * cphi + s * sphi;
    }
  }
  return lb;
}

void dump_belief_pgm(const BeliefMap& bm, const std::string& dir, int step) {
  for (int ch = 0; ch < 4; ++ch) {
    char name[64];
    std::snprintf(name, sizeof(name), "/step_%04d_ch%d.pgm", step, ch);
    std::ofstream out(dir + name, std::ios::binary);
    if (!out) throw std::runtime_error("dump_belief_pgm: cannot write " + dir + name);
    double lo = 0.0, hi = 1e-12;
    for (int iy = 0; iy < bm.height; ++iy)
      for (int ix = 0; ix < bm.width; ++ix) {
        lo = std::min(lo, bm.at(ix, iy, ch));
        hi = std::max(hi, bm.at(ix, iy, ch));
      }
    out << "P5\n" << bm.width << " " << bm.height << "\n255\n";
    for (int iy = bm.height - 1; iy >= 0; --iy)
      for (int ix = 0; ix < bm.width; ++ix) {
        const double v = (bm.at(ix, iy, ch) - lo) / (hi - lo);
        out.put(static_cast<char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))));
      }
  }
}

}  // namespace apfl
