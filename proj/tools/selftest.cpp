// Invariant suite behind `apfl selftest`: oracle comparisons and determinism
// checks, one pass/fail line each.
#include <chrono>
#include <cmath>
#include <iostream>

#include "../tests/oracles.hpp"
#include "apfl/harness.hpp"

namespace {

int failures = 0;

void check(const char* name, bool ok) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "\n";
  if (!ok) ++failures;
}

using namespace apfl;

void test_raycast_oracle() {
  Rng rng(11);
  bool ok = true;
  for (int i = 0; i < 200 && ok; ++i) {
    OccupancyGrid grid = oracle::random_grid(rng, 40, 40, 0.1);
    Pose from{rng.uniform(0.05, 3.95), rng.uniform(0.05, 3.95), 0.0};
    const double angle = rng.uniform(-kPi, kPi);
    int ix, iy;
    grid.world_to_cell(from.x, from.y, ix, iy);
    if (grid.at(ix, iy) == CellCode::Occupied) continue;
    const double fast = raycast(grid, from, angle, 6.0);
    if (!oracle::raycast_matches_oracle(grid, from, angle, 6.0, fast)) ok = false;
  }
  check("raycast matches fine-step oracle (200 random grids)", ok);
}

void test_edt_oracle() {
  Rng rng(12);
  bool ok = true;
  for (int i = 0; i < 20 && ok; ++i) {
    OccupancyGrid grid = oracle::random_grid(rng, 30, 30, 0.1);
    const DistanceField df = distance_transform(grid);
    const auto brute = oracle::edt_bruteforce(grid);
    for (int iy = 0; iy < 30 && ok; ++iy)
      for (int ix = 0; ix < 30; ++ix)
        if (std::abs(df.at(ix, iy) - brute[static_cast<size_t>(iy) * 30 + ix]) > 1e-12) {
          ok = false;
          break;
        }
  }
  check("distance transform matches all-pairs oracle (exact)", ok);
}

void test_astar_oracle() {
  Rng rng(13);
  bool ok = true;
  int compared = 0;
  for (int i = 0; i < 100; ++i) {
    OccupancyGrid grid = oracle::random_grid(rng, 25, 25, 0.1, 0.2, 0.0);
    const auto trav = traversable_cells(grid, 0.04);
    if (trav.size() < 2) continue;
    const auto [fx, fy] = trav[rng.uniform_index(trav.size())];
    const auto [tx, ty] = trav[rng.uniform_index(trav.size())];
    const double want = oracle::dijkstra_cost(grid, fx, fy, tx, ty, 0.04);
    try {
      const auto path = plan_path(grid, Cell{fx, fy}, Cell{tx, ty}, 0.04);
      double cost = 0.0;
      for (size_t k = 1; k < path.size(); ++k)
        cost += (path[k].x != path[k - 1].x && path[k].y != path[k - 1].y) ? std::sqrt(2.0) : 1.0;
      if (std::abs(cost - want) > 1e-9) ok = false;
      ++compared;
    } catch (const NoPathError&) {
      if (std::isfinite(want)) ok = false;
    }
  }
  check("A* cost equals Dijkstra oracle (100 random grids)", ok && compared > 20);
}

void test_crop_oracle() {
  Rng rng(14);
  bool ok = true;
  for (int i = 0; i < 30 && ok; ++i) {
    OccupancyGrid grid = oracle::random_grid(rng, 40, 40, 0.1);
    Pose pose{rng.uniform(0.5, 3.5), rng.uniform(0.5, 3.5), rng.uniform(-kPi, kPi)};
    const OccupancyGrid local = extract_local_map(grid, pose, 21);
    for (int iy = 0; iy < 21 && ok; ++iy)
      for (int ix = 0; ix < 21; ++ix) {
        int gx, gy;
        const CellCode want = oracle::crop_cell_source(grid, pose, 21, ix, iy, gx, gy)
                                  ? grid.at(gx, gy)
                                  : CellCode::Unexplored;
        if (local.at(ix, iy) != want) {
          ok = false;
          break;
        }
      }
  }
  check("local map crop matches dense inverse-mapping oracle (exact)", ok);
}

void test_map_roundtrip() {
  Rng rng(15);
  bool ok = true;
  for (int i = 0; i < 50 && ok; ++i) {
    OccupancyGrid grid = oracle::random_grid(rng, 5 + static_cast<int>(rng.uniform_index(20)),
                                             5 + static_cast<int>(rng.uniform_index(20)), 0.1);
    const std::string canon = serialize_map(grid);
    const std::string again = serialize_map(parse_map(canon));
    if (canon != again) ok = false;
  }
  check("map save/load round-trip is the identity (50 random grids)", ok);
}

void test_episode_determinism() {
  Rng rng(16);
  OccupancyGrid grid = generate_floorplan(48, 48, 0.1, rng);
  const DistanceField df = distance_transform(grid);
  ExperimentSettings s;
  const TaskSpec task = TaskSpec::defaults(TaskKind::Tracking, 10);
  PolicySpec pol;
  pol.kind = PolicyKind::Goalnav;
  const EpisodeResult a = run_episode(grid, df, task, pol, s.episode(), 42);
  const EpisodeResult b = run_episode(grid, df, task, pol, s.episode(), 42);
  bool ok = a.steps.size() == b.steps.size();
  for (size_t i = 0; ok && i < a.steps.size(); ++i)
    ok = a.steps[i].true_pose.x == b.steps[i].true_pose.x &&
         a.steps[i].estimate.x == b.steps[i].estimate.x && a.steps[i].loss == b.steps[i].loss;
  check("episode is bitwise reproducible from seed", ok);
}

void test_resampling_normalized() {
  Rng rng(17);
  bool ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    ParticleSet ps;
    const int K = 2 + static_cast<int>(rng.uniform_index(50));
    ps.particles.resize(K);
    for (auto& p : ps.particles) {
      p.pose = Pose{rng.uniform(-5, 5), rng.uniform(-5, 5), wrap_angle(rng.uniform(-kPi, kPi))};
      p.log_weight = rng.uniform(-3, 0);
    }
    ps.normalize();
    soft_resample(ps, rng.uniform(), rng);
    double sum = 0.0;
    for (const auto& p : ps.particles) sum += std::exp(p.log_weight);
    if (std::abs(sum - 1.0) > 1e-9) ok = false;
  }
  check("soft-resampling preserves normalization to 1e-9", ok);
}

}  // namespace

int run_selftest() {
  const auto t0 = std::chrono::steady_clock::now();
  test_raycast_oracle();
  test_edt_oracle();
  test_astar_oracle();
  test_crop_oracle();
  test_map_roundtrip();
  test_episode_determinism();
  test_resampling_normalized();
  const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (failures == 0 ? "selftest OK" : "selftest FAILED") << " (" << dt << " s)\n";
  return failures == 0 ? 0 : 2;
}
