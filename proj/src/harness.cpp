#include "apfl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <queue>
#include <sstream>
#include <thread>

namespace apfl {

namespace fs = std::filesystem;

TaskKind task_from_string(const std::string& s) {
  if (s == "tracking") return TaskKind::Tracking;
  if (s == "semiglobal") return TaskKind::SemiGlobal;
  if (s == "global") return TaskKind::Global;
  throw ConfigError("unknown task '" + s + "' (expected tracking|semiglobal|global)");
}

std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Tracking: return "tracking";
    case TaskKind::SemiGlobal: return "semiglobal";
    case TaskKind::Global: return "global";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& s) {
  if (s == "turn") return PolicyKind::Turn;
  if (s == "avoid") return PolicyKind::Avoid;
  if (s == "goalnav") return PolicyKind::Goalnav;
  if (s == "learned") return PolicyKind::Learned;
  if (s == "idle") return PolicyKind::Idle;
  throw ConfigError("unknown policy '" + s + "' (expected turn|avoid|goalnav|learned|idle)");
}

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Turn: return "turn";
    case PolicyKind::Avoid: return "avoid";
    case PolicyKind::Goalnav: return "goalnav";
    case PolicyKind::Learned: return "learned";
    case PolicyKind::Idle: return "idle";
  }
  return "?";
}

TaskSpec TaskSpec::defaults(TaskKind kind, int T) {
  TaskSpec spec;
  spec.kind = kind;
  spec.T = T;
  switch (kind) {
    case TaskKind::Tracking: spec.n_particles = 300; break;
    case TaskKind::SemiGlobal: spec.n_particles = 500; break;
    case TaskKind::Global: spec.n_particles = 3000; break;
  }
  return spec;
}

ParticleSet init_belief(const TaskSpec& task, const OccupancyGrid& grid, const Pose& true_pose,
                        Rng& rng, double robot_radius) {
  ParticleSet ps;
  ps.particles.resize(task.n_particles);
  const double lw = -std::log(static_cast<double>(task.n_particles));

  switch (task.kind) {
    case TaskKind::Tracking: {
      Pose center;
      center.x = true_pose.x + rng.normal(0.0, task.init_std_xy);
      center.y = true_pose.y + rng.normal(0.0, task.init_std_xy);
      center.phi = wrap_angle(true_pose.phi + rng.normal(0.0, task.init_std_phi));
      for (auto& p : ps.particles) {
        p.pose.x = center.x + rng.normal(0.0, task.init_std_xy);
        p.pose.y = center.y + rng.normal(0.0, task.init_std_xy);
        p.pose.phi = wrap_angle(center.phi + rng.normal(0.0, task.init_std_phi));
        p.log_weight = lw;
      }
      break;
    }
    case TaskKind::SemiGlobal: {
      Pose guess;
      guess.x = true_pose.x + rng.normal(0.0, task.init_std_xy);
      guess.y = true_pose.y + rng.normal(0.0, task.init_std_xy);
      guess.phi = wrap_angle(true_pose.phi + rng.normal(0.0, task.init_std_phi));
      const double half = task.semiglobal_box / 2.0;
      // The box must contain at least one traversable cell center.
      bool ok = false;
      for (const auto& [ix, iy] : traversable_cells(grid, robot_radius)) {
        double cx, cy;
        grid.cell_center(ix, iy, cx, cy);
        if (std::abs(cx - guess.x) <= half && std::abs(cy - guess.y) <= half) {
          ok = true;
          break;
        }
      }
      if (!ok)
        throw std::runtime_error("init_belief: semi-global box contains no traversable cell");
      for (auto& p : ps.particles) {
        p.pose.x = guess.x + rng.uniform(-half, half);
        p.pose.y = guess.y + rng.uniform(-half, half);
        p.pose.phi = wrap_angle(rng.uniform(-kPi, kPi));
        p.log_weight = lw;
      }
      break;
    }
    case TaskKind::Global: {
      for (auto& p : ps.particles) {
        p.pose = sample_traversable_pose(grid, rng, robot_radius);
        p.log_weight = lw;
      }
      break;
    }
  }
  ps.normalized = true;
  return ps;
}

EpisodeResult run_episode(const OccupancyGrid& grid, const DistanceField& dfield,
                          const TaskSpec& task, const PolicySpec& policy,
                          const EpisodeConfig& cfg, std::uint64_t seed) {
  Rng root(seed);
  Rng rng_init = root.fork(1);
  Rng rng_sim = root.fork(2);
  Rng rng_filter = root.fork(3);
  Rng rng_policy = root.fork(4);

  SimState sim_state;
  sim_state.true_pose = sample_traversable_pose(grid, rng_init, cfg.sim.robot_radius);
  ParticleSet ps = init_belief(task, grid, sim_state.true_pose, rng_init, cfg.sim.robot_radius);

  std::optional<GoalnavPolicy> goalnav;
  if (policy.kind == PolicyKind::Goalnav) goalnav.emplace(grid, cfg.sim, rng_policy);
  if (policy.kind == PolicyKind::Learned && !policy.params)
    throw std::invalid_argument("run_episode: learned policy without parameters");

  LidarScan scan = sense(sim_state.true_pose, grid, cfg.sim.n_beams, cfg.sim.lidar_fov,
                         cfg.sim.lidar_max_range);
  RobotState robot_state;

  EpisodeResult result;
  result.seed = seed;
  result.policy_id = to_string(policy.kind);
  result.steps.reserve(task.T);

  for (int t = 0; t < task.T; ++t) {
    robot_state.steps_remaining = static_cast<double>(task.T - t) / task.T;

    Action action;
    switch (policy.kind) {
      case PolicyKind::Turn:
        action = act_turn(cfg.sim);
        break;
      case PolicyKind::Avoid:
        action = act_avoid(scan, cfg.sim, policy.avoid_threshold);
        break;
      case PolicyKind::Goalnav:
        action = goalnav->act(sim_state.true_pose);
        break;
      case PolicyKind::Idle:
        action = Action{0.0, 0.0};
        break;
      case PolicyKind::Learned: {
        const BeliefMap bm = project_particles(ps, grid);
        const auto modes = extract_modes(ps, cfg.attention_modes, cfg.modes);
        const LocalBelief lb =
            extract_local_belief(bm, grid, modes.front(), cfg.filter.local_map_size);
        PolicyInput input;
        input.local_belief = &lb;
        input.scan = &scan;
        input.robot_state = robot_state;
        action = act_learned(*policy.params, input, cfg.sim);
        break;
      }
    }

    Observation obs;
    try {
      obs = step(sim_state, grid, action, cfg.sim, rng_sim);
      predict(ps, obs.odom, cfg.filter, rng_filter);
      update_weights(ps, obs.scan, dfield, grid, cfg.filter);
      soft_resample(ps, cfg.filter.alpha, rng_filter, cfg.filter.systematic_resampling);
    } catch (const std::runtime_error& e) {
      throw EpisodeError(e.what(), t);
    }

    StepRecord rec;
    rec.true_pose = sim_state.true_pose;
    rec.estimate = estimate_pose(ps);
    rec.loss = pose_loss(rec.estimate, sim_state.true_pose, cfg.filter.beta);
    rec.reward = compute_reward(rec.loss, obs.collided, cfg.lambda_collision);
    rec.collided = obs.collided;
    result.steps.push_back(rec);

    scan = obs.scan;
    robot_state.v_prev = std::clamp(action.v, -cfg.sim.v_max, cfg.sim.v_max);
    robot_state.w_prev = std::clamp(action.w, -cfg.sim.w_max, cfg.sim.w_max);
    robot_state.collided = obs.collided;
  }

  const StepRecord& last = result.steps.back();
  result.final_pos_error =
      std::hypot(last.estimate.x - last.true_pose.x, last.estimate.y - last.true_pose.y);
  result.final_orient_error = std::abs(wrap_angle(last.estimate.phi - last.true_pose.phi));
  return result;
}

MetricsReport aggregate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no results");
  MetricsReport rep;
  rep.n_episodes = static_cast<int>(results.size());
  double sq_pos = 0.0, sq_orient = 0.0, reward_sum = 0.0;
  for (const auto& r : results) {
    sq_pos += r.final_pos_error * r.final_pos_error;
    sq_orient += r.final_orient_error * r.final_orient_error;
    double ep_reward = 0.0;
    for (const auto& s : r.steps) {
      ep_reward += s.reward;
      if (s.collided) ++rep.collisions;
    }
    reward_sum += ep_reward;
  }
  rep.rmse_position_cm = 100.0 * std::sqrt(sq_pos / results.size());
  rep.rmse_orientation_rad = std::sqrt(sq_orient / results.size());
  rep.mean_reward = reward_sum / results.size();
  return rep;
}

namespace {

void svg_arrow(std::ostream& os, const Pose& p, const OccupancyGrid& grid, double len,
               const char* cls, const char* color) {
  // SVG y grows downward; flip about the map's vertical extent.
  const double res = grid.resolution();
  const double x0 = (p.x - grid.origin().x) / res;
  const double y0 = grid.height() - (p.y - grid.origin().y) / res;
  const double x1 = x0 + len * std::cos(p.phi);
  const double y1 = y0 - len * std::sin(p.phi);
  const double hx1 = x1 + 0.35 * len * std::cos(p.phi + kPi * 0.85);
  const double hy1 = y1 - 0.35 * len * std::sin(p.phi + kPi * 0.85);
  const double hx2 = x1 + 0.35 * len * std::cos(p.phi - kPi * 0.85);
  const double hy2 = y1 - 0.35 * len * std::sin(p.phi - kPi * 0.85);
  os << "  <path class=\"" << cls << "\" stroke=\"" << color << "\" fill=\"none\" "
     << "stroke-width=\"0.3\" d=\"M " << x0 << " " << y0 << " L " << x1 << " " << y1 << " M "
     << hx1 << " " << hy1 << " L " << x1 << " " << y1 << " L " << hx2 << " " << hy2 << "\"/>\n";
}

}  // namespace

std::string render_trajectory(const EpisodeResult& result, const OccupancyGrid& grid) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << grid.width() << " "
     << grid.height() << "\">\n";
  os << "  <rect width=\"" << grid.width() << "\" height=\"" << grid.height()
     << "\" fill=\"white\"/>\n";
  for (int iy = 0; iy < grid.height(); ++iy)
    for (int ix = 0; ix < grid.width(); ++ix) {
      const CellCode c = grid.at(ix, iy);
      if (c == CellCode::Free) continue;
      os << "  <rect x=\"" << ix << "\" y=\"" << grid.height() - 1 - iy
         << "\" width=\"1\" height=\"1\" fill=\""
         << (c == CellCode::Occupied ? "#303030" : "#c8c8c8") << "\"/>\n";
    }
  const double arrow_len = 0.25 / grid.resolution();
  for (const auto& s : result.steps) {
    svg_arrow(os, s.true_pose, grid, arrow_len, "truth-arrow", "red");
    svg_arrow(os, s.estimate, grid, arrow_len, "est-arrow", "green");
  }
  if (!result.steps.empty()) {
    const auto& last = result.steps.back();
    auto circle = [&](const Pose& p, const char* cls, const char* color) {
      const double cx = (p.x - grid.origin().x) / grid.resolution();
      const double cy = grid.height() - (p.y - grid.origin().y) / grid.resolution();
      os << "  <circle class=\"" << cls << "\" cx=\"" << cx << "\" cy=\"" << cy
         << "\" r=\"" << arrow_len << "\" stroke=\"" << color
         << "\" fill=\"none\" stroke-width=\"0.3\"/>\n";
    };
    circle(last.true_pose, "truth-final", "red");
    circle(last.estimate, "est-final", "green");
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

void carve_rooms(std::vector<CellCode>& cells, int w, int x0, int y0, int x1, int y1, Rng& rng,
                 int depth) {
  const int rw = x1 - x0, rh = y1 - y0;
  constexpr int kMinSide = 14;
  if (depth <= 0 || (rw < kMinSide && rh < kMinSide)) return;
  const bool split_x = rw >= rh ? true : false;
  const int span = split_x ? rw : rh;
  if (span < kMinSide) return;
  const int cut = 6 + static_cast<int>(rng.uniform_index(span - 12));
  auto at = [&](int ix, int iy) -> CellCode& { return cells[static_cast<size_t>(iy) * w + ix]; };

  if (split_x) {
    const int wx = x0 + cut;
    for (int iy = y0; iy < y1; ++iy) at(wx, iy) = CellCode::Occupied;
    const int door = y0 + 1 + static_cast<int>(rng.uniform_index(std::max(1, rh - 4)));
    for (int iy = door; iy < std::min(door + 3, y1); ++iy) at(wx, iy) = CellCode::Free;
    carve_rooms(cells, w, x0, y0, wx, y1, rng, depth - 1);
    carve_rooms(cells, w, wx + 1, y0, x1, y1, rng, depth - 1);
  } else {
    const int wy = y0 + cut;
    for (int ix = x0; ix < x1; ++ix) at(ix, wy) = CellCode::Occupied;
    const int door = x0 + 1 + static_cast<int>(rng.uniform_index(std::max(1, rw - 4)));
    for (int ix = door; ix < std::min(door + 3, x1); ++ix) at(ix, wy) = CellCode::Free;
    carve_rooms(cells, w, x0, y0, x1, wy, rng, depth - 1);
    carve_rooms(cells, w, x0, wy + 1, x1, y1, rng, depth - 1);
  }
}

}  // namespace

OccupancyGrid generate_floorplan(int width, int height, double resolution, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<CellCode> cells(static_cast<size_t>(width) * height, CellCode::Unexplored);
    auto at = [&](int ix, int iy) -> CellCode& {
      return cells[static_cast<size_t>(iy) * width + ix];
    };
    for (int iy = 1; iy < height - 1; ++iy)
      for (int ix = 1; ix < width - 1; ++ix) at(ix, iy) = CellCode::Free;
    for (int ix = 0; ix < width; ++ix) {
      at(ix, 0) = CellCode::Occupied;
      at(ix, height - 1) = CellCode::Occupied;
    }
    for (int iy = 0; iy < height; ++iy) {
      at(0, iy) = CellCode::Occupied;
      at(width - 1, iy) = CellCode::Occupied;
    }
    carve_rooms(cells, width, 1, 1, width - 1, height - 1, rng, 3);

    // Furniture blocks.
    const int n_blocks = 3 + static_cast<int>(rng.uniform_index(6));
    for (int b = 0; b < n_blocks; ++b) {
      const int bw = 1 + static_cast<int>(rng.uniform_index(3));
      const int bh = 1 + static_cast<int>(rng.uniform_index(3));
      const int bx = 2 + static_cast<int>(rng.uniform_index(std::max(1, width - 4 - bw)));
      const int by = 2 + static_cast<int>(rng.uniform_index(std::max(1, height - 4 - bh)));
      for (int iy = by; iy < by + bh; ++iy)
        for (int ix = bx; ix < bx + bw; ++ix)
          if (at(ix, iy) == CellCode::Free) at(ix, iy) = CellCode::Occupied;
    }

    OccupancyGrid grid(width, height, resolution, Pose{}, cells);
    const double radius = 0.18;
    const auto trav = traversable_cells(grid, radius);
    if (trav.empty()) continue;

    // Keep only the largest 4-connected traversable component; occlude the rest.
    std::vector<int> comp(static_cast<size_t>(width) * height, -1);
    auto tidx = [&](int ix, int iy) { return static_cast<size_t>(iy) * width + ix; };
    std::vector<bool> is_trav(static_cast<size_t>(width) * height, false);
    for (const auto& [ix, iy] : trav) is_trav[tidx(ix, iy)] = true;
    int n_comp = 0;
    std::vector<int> comp_size;
    for (const auto& [sx, sy] : trav) {
      if (comp[tidx(sx, sy)] != -1) continue;
      const int id = n_comp++;
      comp_size.push_back(0);
      std::queue<std::pair<int, int>> frontier;
      frontier.emplace(sx, sy);
      comp[tidx(sx, sy)] = id;
      while (!frontier.empty()) {
        auto [cx, cy] = frontier.front();
        frontier.pop();
        ++comp_size[id];
        static const int d4x[] = {1, -1, 0, 0}, d4y[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = cx + d4x[d], ny = cy + d4y[d];
          if (nx < 0 || nx >= width || ny < 0 || ny >= height) continue;
          if (!is_trav[tidx(nx, ny)] || comp[tidx(nx, ny)] != -1) continue;
          comp[tidx(nx, ny)] = id;
          frontier.emplace(nx, ny);
        }
      }
    }
    const int largest =
        static_cast<int>(std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin());
    if (comp_size[largest] < width * height / 8) continue;  // too cramped, retry
    std::vector<CellCode> fixed = grid.cells();
    for (const auto& [ix, iy] : trav)
      if (comp[tidx(ix, iy)] != largest)
        fixed[tidx(ix, iy)] = CellCode::Occupied;
    return OccupancyGrid(width, height, resolution, Pose{}, std::move(fixed));
  }
  throw std::runtime_error("generate_floorplan: no valid layout found");
}

EpisodeConfig ExperimentSettings::episode() const {
  EpisodeConfig e;
  e.sim = sim;
  e.filter = filter;
  e.lambda_collision = lambda_collision;
  return e;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

ExperimentSettings settings_from_config(const Config& cfg) {
  ExperimentSettings s;
  s.map_resolution = cfg.get_double("map_resolution", 0.1);
  s.map_cells = cfg.get_int("map_cells", 64);
  s.n_train_maps = cfg.get_int("n_train_maps", 10);
  s.n_test_maps = cfg.get_int("n_test_maps", 3);
  s.map_seed = static_cast<std::uint64_t>(cfg.get_int("map_seed", 7));
  s.maps_dir = cfg.get_string("maps_dir", "maps");

  s.sim.robot_radius = cfg.get_double("robot_radius", 0.18);
  s.sim.v_max = cfg.get_double("v_max", 0.5);
  s.sim.w_max = cfg.get_double("w_max", kPi / 2.0);
  s.sim.dt = 1.0 / cfg.get_double("control_hz", 1.7);
  s.sim.n_beams = cfg.get_int("n_beams", 60);
  s.sim.lidar_fov = cfg.get_double("lidar_fov_deg", 240.0) * kPi / 180.0;
  s.sim.lidar_max_range = cfg.get_double("lidar_max_range", 10.0);
  s.sim.odom_noise_xy = cfg.get_double("odom_noise_xy", 0.01);
  s.sim.odom_noise_phi = cfg.get_double("odom_noise_phi_deg", 5.0) * kPi / 180.0;

  s.filter.alpha = cfg.get_double("alpha", 0.5);
  s.filter.beta = cfg.get_double("beta", 0.36);
  s.filter.sigma_lhood = cfg.get_double("sigma_lhood", 0.2);
  s.filter.trans_noise_xy = cfg.get_double("trans_noise_xy", 0.01);
  s.filter.trans_noise_phi = cfg.get_double("trans_noise_phi_deg", 5.0) * kPi / 180.0;
  s.filter.eps_floor = cfg.get_double("eps_floor", 1e-9);
  s.filter.local_map_size = cfg.get_int("local_map_size", 56);
  s.filter.systematic_resampling = cfg.get_bool("systematic_resampling", true);

  s.lambda_collision = cfg.get_double("lambda_collision", 0.1);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  s.episodes = cfg.get_int("episodes", 50);
  s.T = cfg.get_int("T", 25);
  for (const auto& p : split_list(cfg.get_string("policies", "goalnav")))
    s.policies.push_back(policy_from_string(p));
  for (const auto& t : split_list(cfg.get_string("tasks", "tracking")))
    s.tasks.push_back(task_from_string(t));
  s.policy_file = cfg.get_string("policy_file", "");
  s.out_dir = cfg.get_string("out_dir", "results");

  s.trainer.population = cfg.get_int("train_population", 32);
  s.trainer.elite_frac = cfg.get_double("train_elite_frac", 0.25);
  s.trainer.generations = cfg.get_int("train_generations", 20);
  s.trainer.episodes_per_eval = cfg.get_int("train_episodes_per_eval", 4);
  s.trainer.init_std = cfg.get_double("train_init_std", 0.5);
  s.trainer.seed = static_cast<std::uint64_t>(cfg.get_int("train_seed", 3));
  s.train_task = task_from_string(cfg.get_string("train_task", "semiglobal"));
  s.train_T = cfg.get_int("train_T", 50);
  s.train_particles = cfg.get_int("train_particles", 500);
  s.n_workers = cfg.get_int("n_workers", 0);
  s.trainer.n_workers = s.n_workers;

  cfg.reject_unknown_keys();
  return s;
}

std::vector<std::string> generate_map_corpus(const ExperimentSettings& s) {
  fs::create_directories(s.maps_dir);
  Rng rng(s.map_seed);
  std::vector<std::string> paths;
  const int total = s.n_train_maps + s.n_test_maps;
  for (int i = 0; i < total; ++i) {
    Rng map_rng = rng.fork(static_cast<std::uint64_t>(i) + 100);
    OccupancyGrid grid = generate_floorplan(s.map_cells, s.map_cells, s.map_resolution, map_rng);
    char name[32];
    std::snprintf(name, sizeof(name), "map%03d.ogmap", i);
    const std::string path = (fs::path(s.maps_dir) / name).string();
    save_map(grid, path);
    paths.push_back(path);
  }
  return paths;
}

std::string results_csv_header() {
  return "policy,task,split,map_id,seed,rmse_pos_cm,rmse_orient_rad,mean_reward,collisions";
}

namespace {

struct LoadedMap {
  std::string id;
  OccupancyGrid grid;
  DistanceField dfield;
};

std::vector<LoadedMap> load_corpus(const ExperimentSettings& s) {
  const int total = s.n_train_maps + s.n_test_maps;
  bool missing = false;
  for (int i = 0; i < total; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "map%03d.ogmap", i);
    if (!fs::exists(fs::path(s.maps_dir) / name)) missing = true;
  }
  if (missing) generate_map_corpus(s);

  std::vector<LoadedMap> maps;
  for (int i = 0; i < total; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "map%03d.ogmap", i);
    const std::string path = (fs::path(s.maps_dir) / name).string();
    OccupancyGrid grid = load_map(path);
    DistanceField dfield = distance_transform(grid);
    maps.push_back(LoadedMap{std::string(name, 6), std::move(grid), std::move(dfield)});
  }
  return maps;
}

struct EpisodeJob {
  PolicyKind policy;
  TaskKind task;
  std::string split;
  int map_index;
  std::uint64_t seed;
};

}  // namespace

int run_experiment(const ExperimentSettings& s) {
  const auto maps = load_corpus(s);

  std::optional<PolicyParams> learned;
  for (const PolicyKind p : s.policies)
    if (p == PolicyKind::Learned) {
      if (s.policy_file.empty())
        throw ConfigError("policy 'learned' requires policy_file");
      learned = load_policy(s.policy_file);
    }

  std::vector<EpisodeJob> jobs;
  for (const PolicyKind policy : s.policies) {
    for (const TaskKind task : s.tasks) {
      for (const std::string split : {std::string("seen"), std::string("unseen")}) {
        const int lo = split == "seen" ? 0 : s.n_train_maps;
        const int n = split == "seen" ? s.n_train_maps : s.n_test_maps;
        if (n == 0) continue;
        for (int e = 0; e < s.episodes; ++e) {
          EpisodeJob job;
          job.policy = policy;
          job.task = task;
          job.split = split;
          job.map_index = lo + e % n;  // round-robin over the split
          job.seed = s.seed ^ fnv1a(to_string(policy) + "/" + to_string(task) + "/" + split +
                                    "/" + std::to_string(e));
          jobs.push_back(job);
        }
      }
    }
  }

  std::vector<EpisodeResult> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      const EpisodeJob& job = jobs[i];
      const LoadedMap& map = maps[job.map_index];
      TaskSpec task = TaskSpec::defaults(job.task, s.T);
      PolicySpec pol;
      pol.kind = job.policy;
      if (job.policy == PolicyKind::Learned) pol.params = learned;
      try {
        results[i] = run_episode(map.grid, map.dfield, task, pol, s.episode(), job.seed);
        results[i].map_id = map.id;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int workers =
      s.n_workers > 0 ? s.n_workers : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  fs::create_directories(s.out_dir);
  std::ofstream csv(fs::path(s.out_dir) / "results.csv", std::ios::binary);
  csv << results_csv_header() << "\n";
  csv << std::setprecision(12);

  int status = 0;
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i].empty()) {
      std::ofstream(fs::path(s.out_dir) / "errors.txt", std::ios::app)
          << to_string(jobs[i].policy) << "/" << to_string(jobs[i].task) << " seed "
          << jobs[i].seed << ": " << errors[i] << "\n";
      status = 2;
      continue;
    }
    const EpisodeResult& r = results[i];
    const MetricsReport m = aggregate({r});
    csv << to_string(jobs[i].policy) << "," << to_string(jobs[i].task) << "," << jobs[i].split
        << "," << r.map_id << "," << r.seed << "," << m.rmse_position_cm << ","
        << m.rmse_orientation_rad << "," << m.mean_reward << "," << m.collisions << "\n";
  }

  // Human-readable summary per policy x task x split.
  std::ofstream summary(fs::path(s.out_dir) / "summary.txt", std::ios::binary);
  summary << std::fixed << std::setprecision(2);
  summary << std::left << std::setw(10) << "policy" << std::setw(12) << "task" << std::setw(8)
          << "split" << std::right << std::setw(10) << "pos_cm" << std::setw(12) << "orient_rad"
          << std::setw(12) << "reward" << std::setw(8) << "eps" << "\n";
  for (const PolicyKind policy : s.policies)
    for (const TaskKind task : s.tasks)
      for (const std::string split : {std::string("seen"), std::string("unseen")}) {
        std::vector<EpisodeResult> group;
        for (size_t i = 0; i < jobs.size(); ++i)
          if (errors[i].empty() && jobs[i].policy == policy && jobs[i].task == task &&
              jobs[i].split == split)
            group.push_back(results[i]);
        if (group.empty()) continue;
        const MetricsReport m = aggregate(group);
        summary << std::left << std::setw(10) << to_string(policy) << std::setw(12)
                << to_string(task) << std::setw(8) << split << std::right << std::setw(10)
                << m.rmse_position_cm << std::setw(12) << std::setprecision(3)
                << m.rmse_orientation_rad << std::setw(12) << std::setprecision(3)
                << m.mean_reward << std::setw(8) << m.n_episodes << std::setprecision(2) << "\n";
      }
  return status;
}

TrainResult train_policy(const ExperimentSettings& s) {
  const auto maps = load_corpus(s);
  const int n_train = s.n_train_maps;

  PolicyArch arch;
  arch.belief_size = s.filter.local_map_size;

  const TaskSpec task = [&] {
    TaskSpec t = TaskSpec::defaults(s.train_task, s.train_T);
    t.n_particles = s.train_particles;
    return t;
  }();
  const EpisodeConfig ep_cfg = s.episode();

  EvalFn eval = [&](const std::vector<double>& params,
                    const std::vector<std::uint64_t>& seeds) {
    PolicySpec pol;
    pol.kind = PolicyKind::Learned;
    pol.params = PolicyParams{arch, params};
    double total = 0.0;
    for (size_t e = 0; e < seeds.size(); ++e) {
      const LoadedMap& map = maps[e % n_train];
      const EpisodeResult r = run_episode(map.grid, map.dfield, task, pol, ep_cfg, seeds[e]);
      double ep_return = 0.0;
      for (const auto& st : r.steps) ep_return += st.reward;
      total += ep_return;
    }
    return total / static_cast<double>(seeds.size());
  };

  TrainerConfig trainer = s.trainer;
  if (trainer.init_mean.empty()) {
    // Start the search at the strongest passive behavior, rotating in place:
    // the final parameter is the angular-velocity output bias.
    trainer.init_mean.assign(arch.n_params(), 0.0);
    trainer.init_mean.back() = 2.0;
  }
  TrainResult result = cem_train(trainer, arch.n_params(), eval);
  result.best.arch = arch;

  fs::create_directories(s.out_dir);
  if (!s.policy_file.empty()) save_policy(result.best, s.policy_file);
  std::ofstream curve(fs::path(s.out_dir) / "training_curve.csv", std::ios::binary);
  curve << training_curve_csv(result.curve);
  return result;
}

}  // namespace apfl
