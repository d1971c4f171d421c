#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "apfl/belief.hpp"
#include "apfl/simulator.hpp"
#include "apfl/worldmap.hpp"

namespace apfl {

struct RobotState {
  double v_prev = 0.0;
  double w_prev = 0.0;
  bool collided = false;
  double steps_remaining = 0.0;  // normalized to [0, 1]
};

struct PolicyInput {
  const LocalBelief* local_belief = nullptr;
  const LidarScan* scan = nullptr;
  RobotState robot_state;
};

/// Always rotates in place at maximum angular velocity.
Action act_turn(const SimConfig& cfg);

/// Drive forward until a close reading appears; back up from central
/// obstacles, turn away from lateral ones. Decisions use only the minimum
/// range of each of the four angular quarters of the scan.
Action act_avoid(const LidarScan& scan, const SimConfig& cfg, double close_threshold = 0.5);

struct Cell {
  int x = 0, y = 0;
  bool operator==(const Cell&) const = default;
};

struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest 8-connected path over traversable cells (diagonal cost sqrt 2),
/// A* with the octile heuristic. Throws NoPathError when unreachable.
std::vector<Cell> plan_path(const OccupancyGrid& grid, Cell from, Cell to,
                            double robot_radius);

/// Ground-truth goal navigation: pure-pursuit waypoint following along an A*
/// path to a randomly sampled traversable goal; resamples on arrival.
class GoalnavPolicy {
 public:
  GoalnavPolicy(const OccupancyGrid& grid, const SimConfig& cfg, Rng rng);

  Action act(const Pose& true_pose);

 private:
  void replan(const Pose& from);

  const OccupancyGrid& grid_;
  SimConfig cfg_;
  Rng rng_;
  std::vector<Cell> path_;
  size_t waypoint_ = 0;
  double waypoint_reach_dist_ = 0.2;
  double steer_gain_ = 2.0;
};

/// Architecture of the learned policy: pooled local-belief features, sector
/// minima of the scan and the robot state through a two-hidden-layer tanh MLP.
struct PolicyArch {
  int belief_size = 56;   // input crop side
  int belief_pool = 7;    // pooled side
  int scan_sectors = 12;
  int hidden = 64;

  int n_inputs() const { return belief_pool * belief_pool * 4 + scan_sectors + 4; }
  int n_params() const {
    const int in = n_inputs();
    return in * hidden + hidden + hidden * hidden + hidden + hidden * 2 + 2;
  }
};

struct PolicyParams {
  PolicyArch arch;
  std::vector<double> values;
};

/// Deterministic forward pass; outputs scaled to (+-v_max, +-w_max) by tanh.
Action act_learned(const PolicyParams& params, const PolicyInput& input, const SimConfig& cfg);

/// r = -loss - lambda_c * [collided]
double compute_reward(double loss, bool collided, double lambda_c);

void save_policy(const PolicyParams& params, const std::string& path);
PolicyParams load_policy(const std::string& path);

struct TrainerConfig {
  int population = 32;
  double elite_frac = 0.25;
  int generations = 20;
  int episodes_per_eval = 4;
  double init_std = 0.5;
  double min_std = 0.02;
  std::vector<double> init_mean;  // empty = zeros
  std::uint64_t seed = 0;
  int n_workers = 0;  // 0 = hardware concurrency
};

struct GenerationStats {
  int generation = 0;
  double mean_return = 0.0;
  double elite_return = 0.0;
  double best_return = 0.0;
};

struct TrainResult {
  PolicyParams best;
  double best_return = 0.0;
  std::vector<GenerationStats> curve;
};

/// Mean episodic return of a candidate over a fixed set of evaluation seeds.
using EvalFn = std::function<double(const std::vector<double>& params,
                                    const std::vector<std::uint64_t>& seeds)>;

/// Cross-entropy method over a diagonal Gaussian with elite carry-over.
/// Evaluation seeds are held fixed across generations (common random numbers).
TrainResult cem_train(const TrainerConfig& cfg, int n_params, const EvalFn& eval);

std::string training_curve_csv(const std::vector<GenerationStats>& curve);

}  // namespace apfl
