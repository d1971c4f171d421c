#pragma once

#include <optional>
#include <string>
#include <vector>

#include "apfl/belief.hpp"
#include "apfl/config.hpp"
#include "apfl/pfilter.hpp"
#include "apfl/policies.hpp"
#include "apfl/simulator.hpp"
#include "apfl/worldmap.hpp"

namespace apfl {

enum class TaskKind { Tracking, SemiGlobal, Global };

TaskKind task_from_string(const std::string& s);
std::string to_string(TaskKind t);

struct TaskSpec {
  TaskKind kind = TaskKind::Tracking;
  int n_particles = 300;  // 300 tracking / 500 semi-global / 3000 global
  int T = 25;
  double init_std_xy = 0.3;          // m, tracking
  double init_std_phi = kPi / 6.0;   // rad, tracking
  double semiglobal_box = 3.3;       // m

  static TaskSpec defaults(TaskKind kind, int T);
};

/// Initial particle set per task kind: tight Gaussian, uniform box around a
/// noisy guess, or uniform over the traversable area. All weights 1/K.
ParticleSet init_belief(const TaskSpec& task, const OccupancyGrid& grid, const Pose& true_pose,
                        Rng& rng, double robot_radius);

enum class PolicyKind { Turn, Avoid, Goalnav, Learned, Idle };

PolicyKind policy_from_string(const std::string& s);
std::string to_string(PolicyKind p);

struct PolicySpec {
  PolicyKind kind = PolicyKind::Turn;
  std::optional<PolicyParams> params;  // Learned only
  double avoid_threshold = 0.5;
};

struct StepRecord {
  Pose true_pose;
  Pose estimate;
  double loss = 0.0;
  double reward = 0.0;
  bool collided = false;
};

struct EpisodeResult {
  std::vector<StepRecord> steps;
  double final_pos_error = 0.0;    // m
  double final_orient_error = 0.0; // rad, wrapped, absolute
  std::uint64_t seed = 0;
  std::string map_id;
  std::string policy_id;
};

struct EpisodeConfig {
  SimConfig sim;
  FilterConfig filter;
  ModeConfig modes;
  double lambda_collision = 0.1;
  int attention_modes = 1;
};

struct EpisodeError : std::runtime_error {
  int step;
  EpisodeError(const std::string& what, int step_index)
      : std::runtime_error(what + " at step " + std::to_string(step_index)), step(step_index) {}
};

/// One full episode: policy -> simulator -> predict/update/soft-resample ->
/// estimate, loss, reward per step. Bitwise reproducible from (seed, config).
EpisodeResult run_episode(const OccupancyGrid& grid, const DistanceField& dfield,
                          const TaskSpec& task, const PolicySpec& policy,
                          const EpisodeConfig& cfg, std::uint64_t seed);

struct MetricsReport {
  double rmse_position_cm = 0.0;
  double rmse_orientation_rad = 0.0;
  double mean_reward = 0.0;
  int collisions = 0;
  int n_episodes = 0;
};

MetricsReport aggregate(const std::vector<EpisodeResult>& results);

/// SVG rendering of an episode: map cells, estimated poses (green arrows),
/// ground-truth poses (red arrows), final poses circled.
std::string render_trajectory(const EpisodeResult& result, const OccupancyGrid& grid);

/// Procedural multi-room floorplan: bordered building, BSP room walls with
/// door gaps, furniture blocks; the traversable area is kept connected.
OccupancyGrid generate_floorplan(int width, int height, double resolution, Rng& rng);

struct ExperimentSettings {
  SimConfig sim;
  FilterConfig filter;
  EpisodeConfig episode() const;
  double lambda_collision = 0.1;
  double map_resolution = 0.1;
  int map_cells = 64;
  int n_train_maps = 10;
  int n_test_maps = 3;
  std::uint64_t map_seed = 7;
  std::uint64_t seed = 1;
  int episodes = 50;
  int T = 25;
  std::vector<PolicyKind> policies;
  std::vector<TaskKind> tasks;
  std::string maps_dir = "maps";
  std::string policy_file;
  std::string out_dir = "results";
  TrainerConfig trainer;
  TaskKind train_task = TaskKind::SemiGlobal;
  int train_T = 50;
  int train_particles = 500;
  int n_workers = 0;
};

ExperimentSettings settings_from_config(const Config& cfg);

/// Write maps_dir/mapNNN.ogmap for the train+test corpus.
std::vector<std::string> generate_map_corpus(const ExperimentSettings& s);

/// Full policy x task x split matrix; writes results.csv and summary.txt.
/// Returns process exit status (0 ok, 2 episode failure).
int run_experiment(const ExperimentSettings& s);

/// CEM training on the train split; writes the policy file and curve CSV.
TrainResult train_policy(const ExperimentSettings& s);

std::string results_csv_header();

}  // namespace apfl
