#pragma once

#include <array>
#include <vector>

#include "apfl/pfilter.hpp"
#include "apfl/worldmap.hpp"

namespace apfl {

/// H x W x 4 spatial projection of the particle belief, aligned to the global
/// grid. Channels: occupancy ({0, 0.5, 1}), aggregated weight, weighted
/// sin(phi), weighted cos(phi).
struct BeliefMap {
  int width = 0, height = 0;
  std::vector<double> data;  // row-major, 4 channels interleaved per cell

  double& at(int ix, int iy, int ch) {
    return data[(static_cast<size_t>(iy) * width + ix) * 4 + ch];
  }
  double at(int ix, int iy, int ch) const {
    return data[(static_cast<size_t>(iy) * width + ix) * 4 + ch];
  }
};

/// size x size x 4 crop of a belief map, centered and oriented at an
/// attention pose; orientation channels are re-expressed in the attention
/// frame.
struct LocalBelief {
  int size = 0;
  std::vector<double> data;

  double& at(int ix, int iy, int ch) {
    return data[(static_cast<size_t>(iy) * size + ix) * 4 + ch];
  }
  double at(int ix, int iy, int ch) const {
    return data[(static_cast<size_t>(iy) * size + ix) * 4 + ch];
  }
};

struct ModeConfig {
  double bin_xy = 1.0;            // m
  double bin_phi = kPi / 3.0;     // rad (60 degrees)
};

/// Accumulate each particle's (w, w sin phi, w cos phi) into its cell;
/// positions outside the grid clamp to the border cell.
BeliefMap project_particles(const ParticleSet& ps, const OccupancyGrid& grid);

/// k = 1: the circular-mean estimate. k > 1: weighted circular means of the
/// k heaviest coarse bins, ties broken lexicographically by bin index.
std::vector<Pose> extract_modes(const ParticleSet& ps, int k,
                                const ModeConfig& mode_cfg = {});

/// Rotated nearest-neighbor crop of all 4 channels around the attention pose;
/// channels 2-3 rotated into the attention frame; out-of-bounds cells are 0.
LocalBelief extract_local_belief(const BeliefMap& bm, const OccupancyGrid& grid,
                                 const Pose& attend, int size);

/// Write the 4 channels as PGM images `step_%04d_ch%d.pgm` under a directory.
void dump_belief_pgm(const BeliefMap& bm, const std::string& dir, int step);

}  // namespace apfl
