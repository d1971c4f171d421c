#pragma once

#include <string>
#include <vector>

#include "apfl/geometry.hpp"
#include "apfl/simulator.hpp"
#include "apfl/worldmap.hpp"

namespace apfl {

struct Particle {
  Pose pose;
  double log_weight = 0.0;
};

/// Weighted pose hypotheses; the filter's belief state.
struct ParticleSet {
  std::vector<Particle> particles;
  bool normalized = false;

  size_t size() const { return particles.size(); }

  /// Shift log weights so that sum(exp(log_weight)) == 1.
  void normalize();

  /// Linear-domain weights (requires normalized).
  std::vector<double> linear_weights() const;
};

struct FilterConfig {
  double alpha = 0.5;          // soft-resampling mixture
  double beta = 0.36;          // angle weight in the pose loss
  double sigma_lhood = 0.2;    // likelihood-field std, meters
  double trans_noise_xy = 0.01;      // m, per predict step
  double trans_noise_phi = kPi / 36; // rad, per predict step
  double eps_floor = 1e-9;     // per-beam likelihood floor
  int local_map_size = 56;     // cells
  bool systematic_resampling = true;
};

struct Estimate {
  Pose pose;
  double loss = 0.0;
};

/// Propagate each particle by the odometry delta in its own frame plus
/// Gaussian transition noise. Weights are unchanged.
void predict(ParticleSet& ps, const OdomDelta& odom, const FilterConfig& cfg, Rng& rng);

/// size x size window of the global map centered on the pose, heading along
/// the +x image axis. Nearest-neighbor inverse mapping; out-of-bounds cells
/// are Unexplored. size must be odd.
OccupancyGrid extract_local_map(const OccupancyGrid& grid, const Pose& pose, int size);

/// Likelihood-field update: per beam, score the distance from the scan
/// endpoint (in the particle's frame) to the nearest occupied cell. Endpoints
/// at max_range are skipped. Renormalizes afterwards.
void update_weights(ParticleSet& ps, const LidarScan& scan, const DistanceField& dfield,
                    const OccupancyGrid& grid, const FilterConfig& cfg);

/// Log-likelihood of a single pose under the likelihood-field model.
double pose_log_likelihood(const Pose& pose, const LidarScan& scan,
                           const DistanceField& dfield, const FilterConfig& cfg);

/// Resample from q(k) = alpha*w_k + (1-alpha)/K with importance correction
/// w/q, then renormalize. Systematic draws by default, i.i.d. optional.
void soft_resample(ParticleSet& ps, double alpha, Rng& rng, bool systematic = true);

/// Weighted mean position and circular-mean heading.
Pose estimate_pose(const ParticleSet& ps);

/// Squared position error plus beta times squared wrapped heading error.
double pose_loss(const Pose& est, const Pose& truth, double beta);

struct GradientReport {
  double max_rel_error = 0.0;   // analytic vs central finite differences
  double grad_norm = 0.0;       // L2 norm of the analytic gradient
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Differentiate the loss of the weighted estimate after soft-resampling with
/// respect to the pre-resampling weights, holding the drawn indices fixed,
/// and compare against central finite differences.
GradientReport gradient_check(const std::vector<Pose>& poses, const std::vector<double>& weights,
                              const std::vector<int>& draws, const Pose& truth, double alpha,
                              double beta, double fd_step = 1e-6);

/// Debug dump: `# step N alpha A` then one `x y phi log_weight` line per particle.
std::string dump_filter_state(const ParticleSet& ps, int step, double alpha);

}  // namespace apfl
