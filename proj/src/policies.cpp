#include "apfl/policies.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <thread>

namespace apfl {

Action act_turn(const SimConfig& cfg) { return Action{0.0, cfg.w_max}; }

Action act_avoid(const LidarScan& scan, const SimConfig& cfg, double close_threshold) {
  const int n = scan.n_beams;
  double quarter_min[4];
  int closest_quarter = 0;
  double closest = std::numeric_limits<double>::infinity();
  for (int qi = 0; qi < 4; ++qi) {
    const int lo = qi * n / 4, hi = (qi + 1) * n / 4;
    double m = std::numeric_limits<double>::infinity();
    for (int b = lo; b < hi; ++b) m = std::min(m, scan.ranges[b]);
    quarter_min[qi] = m;
    if (m < closest) {
      closest = m;
      closest_quarter = qi;
    }
  }
  (void)quarter_min;
  if (closest > close_threshold) return Action{cfg.v_max, 0.0};
  if (closest_quarter == 1 || closest_quarter == 2) return Action{-cfg.v_max / 2.0, 0.0};
  // Beam 0 is the rightmost beam; turn away from the closest side.
  return closest_quarter == 0 ? Action{0.0, cfg.w_max} : Action{0.0, -cfg.w_max};
}

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

std::vector<Cell> plan_path(const OccupancyGrid& grid, Cell from, Cell to,
                            double robot_radius) {
  const int w = grid.width(), h = grid.height();
  auto traversable = [&](int x, int y) { return grid.traversable(x, y, robot_radius); };
  if (!traversable(from.x, from.y) || !traversable(to.x, to.y))
    throw NoPathError("plan_path: endpoint not traversable");
  if (from == to) return {from};

  auto index = [&](int x, int y) { return static_cast<size_t>(y) * w + x; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<size_t>(w) * h, inf);
  std::vector<int> parent(static_cast<size_t>(w) * h, -1);

  auto octile = [&](int x, int y) {
    const double dx = std::abs(x - to.x), dy = std::abs(y - to.y);
    return std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy);
  };

  using Node = std::pair<double, size_t>;  // (f, cell index)
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  g[index(from.x, from.y)] = 0.0;
  open.emplace(octile(from.x, from.y), index(from.x, from.y));

  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    const auto [f, ci] = open.top();
    open.pop();
    const int cx = static_cast<int>(ci % w), cy = static_cast<int>(ci / w);
    if (f > g[ci] + octile(cx, cy) + 1e-12) continue;  // stale entry
    if (cx == to.x && cy == to.y) break;
    for (int d = 0; d < 8; ++d) {
      const int nx = cx + dx8[d], ny = cy + dy8[d];
      if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
      if (!traversable(nx, ny)) continue;
      const bool diagonal = d >= 4;
      // No cutting corners past blocked orthogonal neighbors.
      if (diagonal && (!traversable(cx, ny) || !traversable(nx, cy))) continue;
      const double cost = diagonal ? kSqrt2 : 1.0;
      const size_t ni = index(nx, ny);
      if (g[ci] + cost < g[ni] - 1e-12) {
        g[ni] = g[ci] + cost;
        parent[ni] = static_cast<int>(ci);
        open.emplace(g[ni] + octile(nx, ny), ni);
      }
    }
  }

  const size_t goal_i = index(to.x, to.y);
  if (g[goal_i] == inf) throw NoPathError("plan_path: no path");
  std::vector<Cell> path;
  for (int ci = static_cast<int>(goal_i); ci != -1; ci = parent[ci])
    path.push_back(Cell{ci % w, ci / w});
  std::reverse(path.begin(), path.end());
  return path;
}

GoalnavPolicy::GoalnavPolicy(const OccupancyGrid& grid, const SimConfig& cfg, Rng rng)
    : grid_(grid), cfg_(cfg), rng_(rng) {}

void GoalnavPolicy::replan(const Pose& from) {
  int fx, fy;
  grid_.world_to_cell_clamped(from.x, from.y, fx, fy);
  // The robot can sit legally in a cell whose center is too close to a wall
  // to count as traversable; plan from the nearest traversable cell instead.
  if (!grid_.traversable(fx, fy, cfg_.robot_radius)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [cx, cy] : traversable_cells(grid_, cfg_.robot_radius)) {
      const double d = std::hypot(static_cast<double>(cx - fx), static_cast<double>(cy - fy));
      if (d < best) {
        best = d;
        fx = cx;
        fy = cy;
      }
    }
    if (!std::isfinite(best)) throw NoPathError("goalnav: no traversable cells");
  }
  for (int attempt = 0; attempt < 32; ++attempt) {
    const Pose goal = sample_traversable_pose(grid_, rng_, cfg_.robot_radius);
    int gx, gy;
    grid_.world_to_cell_clamped(goal.x, goal.y, gx, gy);
    try {
      path_ = plan_path(grid_, Cell{fx, fy}, Cell{gx, gy}, cfg_.robot_radius);
      waypoint_ = 0;
      return;
    } catch (const NoPathError&) {
      continue;
    }
  }
  throw NoPathError("goalnav: no reachable goal found");
}

Action GoalnavPolicy::act(const Pose& true_pose) {
  if (path_.empty() || waypoint_ >= path_.size()) replan(true_pose);

  double wx, wy;
  while (true) {
    grid_.cell_center(path_[waypoint_].x, path_[waypoint_].y, wx, wy);
    if (std::hypot(wx - true_pose.x, wy - true_pose.y) > waypoint_reach_dist_) break;
    ++waypoint_;
    if (waypoint_ >= path_.size()) {
      replan(true_pose);
      if (path_.size() == 1) {  // already at the new goal cell
        grid_.cell_center(path_[0].x, path_[0].y, wx, wy);
        break;
      }
    }
  }

  const double bearing = std::atan2(wy - true_pose.y, wx - true_pose.x);
  const double err = wrap_angle(bearing - true_pose.phi);
  Action a;
  a.w = std::clamp(steer_gain_ * err, -cfg_.w_max, cfg_.w_max);
  a.v = cfg_.v_max * std::max(0.0, std::cos(err));
  return a;
}

namespace {

std::vector<double> policy_features(const PolicyArch& arch, const PolicyInput& input,
                                    const SimConfig& cfg) {
  std::vector<double> x;
  x.reserve(arch.n_inputs());

  const LocalBelief& lb = *input.local_belief;
  if (lb.size != arch.belief_size)
    throw std::invalid_argument("act_learned: local belief size mismatch");
  if (arch.belief_size % arch.belief_pool != 0)
    throw std::invalid_argument("act_learned: belief size not divisible by pooled size");
  const int block = arch.belief_size / arch.belief_pool;
  for (int ch = 0; ch < 4; ++ch)
    for (int py = 0; py < arch.belief_pool; ++py)
      for (int px = 0; px < arch.belief_pool; ++px) {
        double sum = 0.0;
        for (int iy = py * block; iy < (py + 1) * block; ++iy)
          for (int ix = px * block; ix < (px + 1) * block; ++ix) sum += lb.at(ix, iy, ch);
        x.push_back(sum / (block * block));
      }

  const LidarScan& scan = *input.scan;
  for (int s = 0; s < arch.scan_sectors; ++s) {
    const int lo = s * scan.n_beams / arch.scan_sectors;
    const int hi = (s + 1) * scan.n_beams / arch.scan_sectors;
    double m = scan.max_range;
    for (int b = lo; b < hi; ++b) m = std::min(m, scan.ranges[b]);
    x.push_back(m / scan.max_range);
  }

  x.push_back(input.robot_state.v_prev / cfg.v_max);
  x.push_back(input.robot_state.w_prev / cfg.w_max);
  x.push_back(input.robot_state.collided ? 1.0 : 0.0);
  x.push_back(input.robot_state.steps_remaining);
  return x;
}

}  // namespace

Action act_learned(const PolicyParams& params, const PolicyInput& input, const SimConfig& cfg) {
  const PolicyArch& arch = params.arch;
  if (static_cast<int>(params.values.size()) != arch.n_params())
    throw std::invalid_argument("act_learned: parameter dimension mismatch");

  const std::vector<double> x = policy_features(arch, input, cfg);
  const int in = arch.n_inputs(), h = arch.hidden;
  const double* p = params.values.data();

  std::vector<double> h1(h), h2(h);
  for (int j = 0; j < h; ++j) {
    double acc = p[in * h + j];  // bias after the weight block
    for (int i = 0; i < in; ++i) acc += p[j * in + i] * x[i];
    h1[j] = std::tanh(acc);
  }
  const double* p2 = p + in * h + h;
  for (int j = 0; j < h; ++j) {
    double acc = p2[h * h + j];
    for (int i = 0; i < h; ++i) acc += p2[j * h + i] * h1[i];
    h2[j] = std::tanh(acc);
  }
  const double* p3 = p2 + h * h + h;
  double out[2];
  for (int j = 0; j < 2; ++j) {
    double acc = p3[2 * h + j];
    for (int i = 0; i < h; ++i) acc += p3[j * h + i] * h2[i];
    out[j] = std::tanh(acc);
  }
  return Action{out[0] * cfg.v_max, out[1] * cfg.w_max};
}

double compute_reward(double loss, bool collided, double lambda_c) {
  return -loss - (collided ? lambda_c : 0.0);
}

void save_policy(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << "APFNPOLICY 1\n";
  out << "belief_size " << params.arch.belief_size << " belief_pool " << params.arch.belief_pool
      << " scan_sectors " << params.arch.scan_sectors << " hidden " << params.arch.hidden
      << " n_params " << params.values.size() << "\n";
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(double)));
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "APFNPOLICY" || version != 1)
    throw std::runtime_error("load_policy: bad header in " + path);
  PolicyParams params;
  std::string key;
  size_t n_params = 0;
  for (int i = 0; i < 5; ++i) {
    in >> key;
    if (key == "belief_size")
      in >> params.arch.belief_size;
    else if (key == "belief_pool")
      in >> params.arch.belief_pool;
    else if (key == "scan_sectors")
      in >> params.arch.scan_sectors;
    else if (key == "hidden")
      in >> params.arch.hidden;
    else if (key == "n_params")
      in >> n_params;
    else
      throw std::runtime_error("load_policy: unknown architecture key '" + key + "'");
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  if (n_params != static_cast<size_t>(params.arch.n_params()))
    throw std::runtime_error("load_policy: parameter count does not match architecture");
  params.values.resize(n_params);
  in.read(reinterpret_cast<char*>(params.values.data()),
          static_cast<std::streamsize>(n_params * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != n_params * sizeof(double))
    throw std::runtime_error("load_policy: truncated parameter block");
  return params;
}

TrainResult cem_train(const TrainerConfig& cfg, int n_params, const EvalFn& eval) {
  const int n_elite = std::max(2, static_cast<int>(cfg.population * cfg.elite_frac));
  if (n_elite > cfg.population)
    throw std::invalid_argument("cem_train: elite count exceeds population");

  Rng rng(cfg.seed);
  std::vector<std::uint64_t> eval_seeds(cfg.episodes_per_eval);
  for (int e = 0; e < cfg.episodes_per_eval; ++e) eval_seeds[e] = rng.next_u64();

  std::vector<double> mean(n_params, 0.0), stddev(n_params, cfg.init_std);
  if (!cfg.init_mean.empty()) {
    if (static_cast<int>(cfg.init_mean.size()) != n_params)
      throw std::invalid_argument("cem_train: init_mean dimension mismatch");
    mean = cfg.init_mean;
  }

  struct Candidate {
    std::vector<double> params;
    double score = -std::numeric_limits<double>::infinity();
    bool scored = false;
  };

  std::vector<Candidate> elites;  // carried over with cached scores
  TrainResult result;
  result.best_return = -std::numeric_limits<double>::infinity();

  const int workers = cfg.n_workers > 0
                          ? cfg.n_workers
                          : std::max(1u, std::thread::hardware_concurrency());

  for (int gen = 0; gen <= cfg.generations; ++gen) {
    std::vector<Candidate> pop;
    pop.reserve(cfg.population);
    for (const auto& e : elites) pop.push_back(e);
    if (gen == 0) {
      // Score the unperturbed mean so the search never regresses below it.
      Candidate c;
      c.params = mean;
      pop.push_back(std::move(c));
    }
    while (static_cast<int>(pop.size()) < cfg.population) {
      Candidate c;
      c.params.resize(n_params);
      for (int i = 0; i < n_params; ++i) c.params[i] = rng.normal(mean[i], stddev[i]);
      pop.push_back(std::move(c));
    }

    std::atomic<size_t> next{0};
    auto work = [&]() {
      for (size_t i = next.fetch_add(1); i < pop.size(); i = next.fetch_add(1)) {
        if (pop[i].scored) continue;  // elite seeds are fixed, score is valid
        const double r = eval(pop[i].params, eval_seeds);
        pop[i].score = std::isfinite(r) ? r : -std::numeric_limits<double>::infinity();
        pop[i].scored = true;
      }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    std::stable_sort(pop.begin(), pop.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

    GenerationStats stats;
    stats.generation = gen;
    double sum = 0.0;
    int n_finite = 0;
    for (const auto& c : pop)
      if (std::isfinite(c.score)) {
        sum += c.score;
        ++n_finite;
      }
    stats.mean_return = n_finite ? sum / n_finite : 0.0;
    double esum = 0.0;
    for (int i = 0; i < n_elite; ++i) esum += pop[i].score;
    stats.elite_return = esum / n_elite;
    if (pop[0].score > result.best_return) {
      result.best_return = pop[0].score;
      result.best.values = pop[0].params;
    }
    stats.best_return = result.best_return;
    result.curve.push_back(stats);

    elites.assign(pop.begin(), pop.begin() + n_elite);

    // Refit the sampling distribution to the elite set. Extra variance that
    // decays to zero over the run keeps the search from collapsing before the
    // mean has finished moving.
    const double noise_var = cfg.init_std * cfg.init_std *
                             std::max(0.0, 1.0 - static_cast<double>(gen + 1) /
                                                     std::max(1, cfg.generations));
    for (int i = 0; i < n_params; ++i) {
      double m = 0.0;
      for (const auto& e : elites) m += e.params[i];
      m /= n_elite;
      double var = 0.0;
      for (const auto& e : elites) var += (e.params[i] - m) * (e.params[i] - m);
      mean[i] = m;
      stddev[i] = std::max(cfg.min_std, std::sqrt(var / n_elite + noise_var));
    }
  }
  return result;
}

std::string training_curve_csv(const std::vector<GenerationStats>& curve) {
  std::ostringstream os;
  os << "generation,mean_return,elite_return,best_return\n";
  os.precision(12);
  for (const auto& s : curve)
    os << s.generation << "," << s.mean_return << "," << s.elite_return << "," << s.best_return
       << "\n";
  return os.str();
}

}  // namespace apfl
