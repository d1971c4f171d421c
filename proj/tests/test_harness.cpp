#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "apfl/harness.hpp"
#include "oracles.hpp"

using namespace apfl;

namespace {

OccupancyGrid walled_room(int w, int h, double res = 0.1) {
  std::vector<CellCode> cells(static_cast<size_t>(w) * h, CellCode::Free);
  for (int ix = 0; ix < w; ++ix) {
    cells[ix] = CellCode::Occupied;
    cells[static_cast<size_t>(h - 1) * w + ix] = CellCode::Occupied;
  }
  for (int iy = 0; iy < h; ++iy) {
    cells[static_cast<size_t>(iy) * w] = CellCode::Occupied;
    cells[static_cast<size_t>(iy) * w + w - 1] = CellCode::Occupied;
  }
  return OccupancyGrid(w, h, res, Pose{}, cells);
}

}  // namespace

TEST_CASE("init_belief: global task spreads uniform weights over traversable space") {
  const OccupancyGrid grid = walled_room(60, 60);
  TaskSpec task = TaskSpec::defaults(TaskKind::Global, 25);
  CHECK(task.n_particles == 3000);
  Rng rng(1);
  const ParticleSet ps = init_belief(task, grid, Pose{3.0, 3.0, 0.0}, rng, 0.18);
  REQUIRE(ps.size() == 3000);
  CHECK(ps.normalized);
  for (const auto& p : ps.particles) {
    CHECK(std::exp(p.log_weight) == doctest::Approx(1.0 / 3000.0).epsilon(1e-12));
    int ix, iy;
    grid.world_to_cell(p.pose.x, p.pose.y, ix, iy);
    CHECK(grid.traversable(ix, iy, 0.18));
  }
}

TEST_CASE("init_belief: tracking with zero spread degenerates to the guess") {
  const OccupancyGrid grid = walled_room(60, 60);
  TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 25);
  task.n_particles = 50;
  task.init_std_xy = 0.0;
  task.init_std_phi = 0.0;
  Rng rng(2);
  const Pose truth{3.0, 3.0, 0.7};
  const ParticleSet ps = init_belief(task, grid, truth, rng, 0.18);
  // With zero std the noisy guess equals the truth and every particle sits on it.
  for (const auto& p : ps.particles) {
    CHECK(p.pose.x == doctest::Approx(truth.x).epsilon(1e-12));
    CHECK(p.pose.y == doctest::Approx(truth.y).epsilon(1e-12));
    CHECK(std::abs(wrap_angle(p.pose.phi - truth.phi)) < 1e-12);
  }
}

TEST_CASE("init_belief: tracking spread matches the configured std (Monte Carlo)") {
  const OccupancyGrid grid = walled_room(200, 200);
  TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 25);
  task.n_particles = 10000;
  Rng rng(3);
  const Pose truth{10.0, 10.0, 0.0};
  const ParticleSet ps = init_belief(task, grid, truth, rng, 0.18);
  double mx = 0.0;
  for (const auto& p : ps.particles) mx += p.pose.x;
  mx /= ps.size();
  double var = 0.0;
  for (const auto& p : ps.particles) var += (p.pose.x - mx) * (p.pose.x - mx);
  CHECK(std::sqrt(var / ps.size()) == doctest::Approx(task.init_std_xy).epsilon(0.05));
}

TEST_CASE("init_belief: semi-global box with no traversable cells is an error") {
  // All occupied except one corner chamber far from the guess; the box around
  // the guess contains nothing traversable.
  std::vector<CellCode> cells(100 * 100, CellCode::Occupied);
  for (int iy = 2; iy < 9; ++iy)
    for (int ix = 2; ix < 9; ++ix) cells[static_cast<size_t>(iy) * 100 + ix] = CellCode::Free;
  const OccupancyGrid grid(100, 100, 0.1, Pose{}, cells);
  TaskSpec task = TaskSpec::defaults(TaskKind::SemiGlobal, 25);
  task.semiglobal_box = 1.0;
  Rng rng(4);
  CHECK_THROWS_AS(init_belief(task, grid, Pose{8.0, 8.0, 0.0}, rng, 0.18),
                  std::runtime_error);
}

TEST_CASE("run_episode: turn policy stays in place") {
  const OccupancyGrid grid = walled_room(60, 60);
  const DistanceField df = distance_transform(grid);
  const TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 25);
  PolicySpec pol;
  pol.kind = PolicyKind::Turn;
  EpisodeConfig cfg;
  const EpisodeResult res = run_episode(grid, df, task, pol, cfg, 7);
  REQUIRE(res.steps.size() == 25);
  const Pose& first = res.steps.front().true_pose;
  const Pose& last = res.steps.back().true_pose;
  CHECK(std::abs(first.x - last.x) < 1e-6);
  CHECK(std::abs(first.y - last.y) < 1e-6);
}

TEST_CASE("run_episode: bitwise reproducible from the seed") {
  const OccupancyGrid grid = walled_room(60, 60);
  const DistanceField df = distance_transform(grid);
  const TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 15);
  for (const PolicyKind kind : {PolicyKind::Turn, PolicyKind::Avoid, PolicyKind::Goalnav}) {
    PolicySpec pol;
    pol.kind = kind;
    EpisodeConfig cfg;
    const EpisodeResult a = run_episode(grid, df, task, pol, cfg, 99);
    const EpisodeResult b = run_episode(grid, df, task, pol, cfg, 99);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i) {
      CHECK(a.steps[i].true_pose.x == b.steps[i].true_pose.x);
      CHECK(a.steps[i].true_pose.phi == b.steps[i].true_pose.phi);
      CHECK(a.steps[i].estimate.x == b.steps[i].estimate.x);
      CHECK(a.steps[i].loss == b.steps[i].loss);
      CHECK(a.steps[i].reward == b.steps[i].reward);
    }
    CHECK(a.final_pos_error == b.final_pos_error);
  }
}

TEST_CASE("run_episode: different seeds give different trajectories") {
  const OccupancyGrid grid = walled_room(60, 60);
  const DistanceField df = distance_transform(grid);
  const TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 10);
  PolicySpec pol;
  pol.kind = PolicyKind::Goalnav;
  EpisodeConfig cfg;
  const EpisodeResult a = run_episode(grid, df, task, pol, cfg, 1);
  const EpisodeResult b = run_episode(grid, df, task, pol, cfg, 2);
  CHECK(a.steps.front().true_pose.x != b.steps.front().true_pose.x);
}

TEST_CASE("run_episode: filtering reduces tracking loss on average") {
  const OccupancyGrid grid = walled_room(60, 60);
  const DistanceField df = distance_transform(grid);
  TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 25);
  task.n_particles = 200;
  PolicySpec pol;
  pol.kind = PolicyKind::Idle;
  EpisodeConfig cfg;
  double first_mean = 0.0, last_mean = 0.0;
  const int n = 50;
  for (int e = 0; e < n; ++e) {
    const EpisodeResult res = run_episode(grid, df, task, pol, cfg, 1000 + e);
    first_mean += res.steps.front().loss;
    last_mean += res.steps.back().loss;
  }
  // A stationary robot with informative scans should not lose track: the
  // mean loss at the end of the episode is no worse than at the start.
  CHECK(last_mean / n <= first_mean / n);
}

TEST_CASE("aggregate: worked RMSE examples") {
  EpisodeResult a;
  a.final_pos_error = 0.2;  // 20 cm
  a.final_orient_error = 0.1;
  EpisodeResult b;
  b.final_pos_error = 0.2;
  b.final_orient_error = 0.3;
  StepRecord r;
  r.reward = -0.5;
  a.steps = {r};
  b.steps = {r};

  const MetricsReport one = aggregate({a});
  CHECK(one.rmse_position_cm == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(one.rmse_orientation_rad == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(one.mean_reward == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(one.n_episodes == 1);

  EpisodeResult c;
  c.final_pos_error = 0.4;
  c.final_orient_error = 0.1;
  c.steps = {r};
  const MetricsReport two = aggregate({a, c});
  // sqrt((20^2 + 40^2)/2) = sqrt(1000) = 31.622...
  CHECK(two.rmse_position_cm == doctest::Approx(std::sqrt(1000.0)).epsilon(1e-12));
}

TEST_CASE("render_trajectory: well-formed SVG with one arrow pair per step") {
  const OccupancyGrid grid = walled_room(40, 40);
  const DistanceField df = distance_transform(grid);
  const TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 12);
  PolicySpec pol;
  pol.kind = PolicyKind::Goalnav;
  EpisodeConfig cfg;
  const EpisodeResult res = run_episode(grid, df, task, pol, cfg, 5);
  const std::string svg = render_trajectory(res, grid);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  size_t truth_count = 0, est_count = 0, pos = 0;
  while ((pos = svg.find("truth-arrow", pos)) != std::string::npos) {
    ++truth_count;
    pos += 1;
  }
  pos = 0;
  while ((pos = svg.find("est-arrow", pos)) != std::string::npos) {
    ++est_count;
    pos += 1;
  }
  CHECK(truth_count == res.steps.size());
  CHECK(est_count == res.steps.size());
  CHECK(svg.find("truth-final") != std::string::npos);
  CHECK(svg.find("est-final") != std::string::npos);
}

TEST_CASE("config: parse, defaults and strict unknown-key rejection") {
  const Config cfg = Config::parse("alpha = 0.7\nepisodes = 10\n# comment\npolicies = turn\n");
  CHECK(cfg.get_double("alpha", 0.5) == doctest::Approx(0.7));
  CHECK(cfg.get_int("episodes", 50) == 10);
  CHECK(cfg.get_string("policies", "") == "turn");
  CHECK(cfg.get_double("beta", 0.36) == doctest::Approx(0.36));  // default
  cfg.reject_unknown_keys();  // everything touched

  const Config bad = Config::parse("alpha = 0.7\nbogus_key = 1\n");
  bad.get_double("alpha", 0.5);
  CHECK_THROWS_AS(bad.reject_unknown_keys(), ConfigError);
}

TEST_CASE("config: malformed lines and duplicates rejected") {
  CHECK_THROWS_AS(Config::parse("alpha 0.7\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("alpha = 1\nalpha = 2\n"), ConfigError);
  const Config cfg = Config::parse("x = abc\n");
  CHECK_THROWS_AS(cfg.get_double("x", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("x", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("x", false), ConfigError);
}

TEST_CASE("settings_from_config: known keys accepted, unknown rejected") {
  const Config ok = Config::parse("alpha = 0.6\nepisodes = 5\ntasks = tracking\npolicies = turn\n");
  const ExperimentSettings s = settings_from_config(ok);
  CHECK(s.filter.alpha == doctest::Approx(0.6));
  CHECK(s.episodes == 5);
  REQUIRE(s.tasks.size() == 1);
  CHECK(s.tasks[0] == TaskKind::Tracking);
  REQUIRE(s.policies.size() == 1);
  CHECK(s.policies[0] == PolicyKind::Turn);

  const Config bad = Config::parse("alpa = 0.6\n");
  CHECK_THROWS_AS(settings_from_config(bad), ConfigError);
}

TEST_CASE("generate_floorplan: bordered, connected and reproducible") {
  Rng rng_a(17), rng_b(17);
  const OccupancyGrid a = generate_floorplan(64, 64, 0.1, rng_a);
  const OccupancyGrid b = generate_floorplan(64, 64, 0.1, rng_b);
  CHECK(serialize_map(a) == serialize_map(b));
  // Full occupied border.
  for (int ix = 0; ix < 64; ++ix) {
    CHECK(a.at(ix, 0) == CellCode::Occupied);
    CHECK(a.at(ix, 63) == CellCode::Occupied);
  }
  for (int iy = 0; iy < 64; ++iy) {
    CHECK(a.at(0, iy) == CellCode::Occupied);
    CHECK(a.at(63, iy) == CellCode::Occupied);
  }
  // Traversable area is nonempty and 4-connected (single flood fill covers it).
  const auto trav = traversable_cells(a, 0.18);
  REQUIRE(trav.size() >= static_cast<size_t>(64 * 64 / 8));
  std::set<std::pair<int, int>> open(trav.begin(), trav.end());
  std::vector<std::pair<int, int>> stack{*open.begin()};
  std::set<std::pair<int, int>> seen{*open.begin()};
  while (!stack.empty()) {
    const auto [cx, cy] = stack.back();
    stack.pop_back();
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const std::pair<int, int> nb{cx + dx[d], cy + dy[d]};
      if (open.count(nb) && !seen.count(nb)) {
        seen.insert(nb);
        stack.push_back(nb);
      }
    }
  }
  CHECK(seen.size() == open.size());
}

TEST_CASE("map corpus: generated on disk, loadable, split bookkeeping stable") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "apfl_corpus_test";
  fs::remove_all(dir);
  ExperimentSettings s;
  s.maps_dir = dir.string();
  s.n_train_maps = 3;
  s.n_test_maps = 2;
  s.map_cells = 48;
  const auto paths = generate_map_corpus(s);
  REQUIRE(paths.size() == 5);
  for (const auto& p : paths) {
    CHECK(fs::exists(p));
    const OccupancyGrid grid = load_map(p);
    CHECK(grid.width() == 48);
  }
  // Regenerating yields byte-identical files.
  std::vector<std::string> before;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    before.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  const auto paths2 = generate_map_corpus(s);
  for (size_t i = 0; i < paths.size(); ++i) {
    std::ifstream in(paths2[i], std::ios::binary);
    const std::string again((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    CHECK(again == before[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: CSV output is byte-identical across reruns") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "apfl_experiment_test";
  fs::remove_all(base);
  ExperimentSettings s;
  s.maps_dir = (base / "maps").string();
  s.out_dir = (base / "results").string();
  s.n_train_maps = 2;
  s.n_test_maps = 1;
  s.map_cells = 48;
  s.episodes = 3;
  s.T = 8;
  s.policies = {PolicyKind::Turn};
  s.tasks = {TaskKind::Tracking};
  s.n_workers = 2;
  REQUIRE(run_experiment(s) == 0);
  const fs::path csv = fs::path(s.out_dir) / "results.csv";
  REQUIRE(fs::exists(csv));
  std::ifstream in1(csv, std::ios::binary);
  const std::string first((std::istreambuf_iterator<char>(in1)), std::istreambuf_iterator<char>());
  CHECK(first.rfind(results_csv_header(), 0) == 0);
  // policy x task x {seen, unseen} x episodes rows + header.
  CHECK(std::count(first.begin(), first.end(), '\n') == 1 + 2 * 3);
  CHECK(first.find("seen") != std::string::npos);
  CHECK(first.find("unseen") != std::string::npos);
  REQUIRE(run_experiment(s) == 0);
  std::ifstream in2(csv, std::ios::binary);
  const std::string second((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  CHECK(second == first);
  CHECK(fs::exists(fs::path(s.out_dir) / "summary.txt"));
  fs::remove_all(base);
}
