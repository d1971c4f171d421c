#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "apfl/belief.hpp"
#include "oracles.hpp"

using namespace apfl;

namespace {

ParticleSet make_set(std::vector<Particle> particles) {
  ParticleSet ps;
  ps.particles = std::move(particles);
  ps.normalize();
  return ps;
}

OccupancyGrid free_grid(int w, int h, double res = 0.1) {
  return OccupancyGrid(w, h, res, Pose{},
                       std::vector<CellCode>(static_cast<size_t>(w) * h, CellCode::Free));
}

}  // namespace

TEST_CASE("project_particles: single particle, quarter-turn heading") {
  const OccupancyGrid grid = free_grid(10, 10);
  ParticleSet ps = make_set({{Pose{0.35, 0.75, kPi / 2.0}, 0.0}});
  const BeliefMap bm = project_particles(ps, grid);
  CHECK(bm.width == 10);
  CHECK(bm.height == 10);
  CHECK(bm.at(3, 7, 1) == doctest::Approx(1.0));
  CHECK(bm.at(3, 7, 2) == doctest::Approx(1.0));       // w * sin(pi/2)
  CHECK(bm.at(3, 7, 3) == doctest::Approx(0.0).epsilon(1e-12));  // w * cos(pi/2)
  // Everything else empty in the weight channel.
  double total = 0.0;
  for (int iy = 0; iy < 10; ++iy)
    for (int ix = 0; ix < 10; ++ix) total += bm.at(ix, iy, 1);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("project_particles: occupancy channel encodes the map") {
  std::vector<CellCode> cells(9, CellCode::Free);
  cells[4] = CellCode::Unexplored;
  cells[8] = CellCode::Occupied;
  const OccupancyGrid grid(3, 3, 0.1, Pose{}, cells);
  ParticleSet ps = make_set({{Pose{0.15, 0.15, 0.0}, 0.0}});
  const BeliefMap bm = project_particles(ps, grid);
  CHECK(bm.at(0, 0, 0) == 0.0);
  CHECK(bm.at(1, 1, 0) == 0.5);
  CHECK(bm.at(2, 2, 0) == 1.0);
}

TEST_CASE("project_particles: antipodal headings cancel the orientation channels") {
  const OccupancyGrid grid = free_grid(5, 5);
  ParticleSet ps = make_set({{Pose{0.25, 0.25, 0.0}, 0.0}, {Pose{0.25, 0.25, kPi}, 0.0}});
  const BeliefMap bm = project_particles(ps, grid);
  CHECK(bm.at(2, 2, 1) == doctest::Approx(1.0));
  CHECK(std::abs(bm.at(2, 2, 2)) < 1e-12);
  CHECK(std::abs(bm.at(2, 2, 3)) < 1e-12);
}

TEST_CASE("project_particles: out-of-bounds particles clamp to the border") {
  const OccupancyGrid grid = free_grid(5, 5);
  ParticleSet ps = make_set({{Pose{-3.0, 10.0, 0.0}, 0.0}});
  const BeliefMap bm = project_particles(ps, grid);
  CHECK(bm.at(0, 4, 1) == doctest::Approx(1.0));
}

TEST_CASE("project_particles: matches dense re-accumulation oracle") {
  Rng rng(31);
  const OccupancyGrid grid = oracle::random_grid(rng, 20, 20, 0.1);
  std::vector<Particle> particles;
  for (int i = 0; i < 200; ++i)
    particles.push_back({Pose{rng.uniform(-0.2, 2.2), rng.uniform(-0.2, 2.2),
                              rng.uniform(-kPi, kPi)},
                         rng.uniform(-2.0, 0.0)});
  ParticleSet ps = make_set(std::move(particles));
  const BeliefMap bm = project_particles(ps, grid);

  std::vector<double> w(400, 0.0), s(400, 0.0), c(400, 0.0);
  for (const auto& p : ps.particles) {
    int ix, iy;
    grid.world_to_cell_clamped(p.pose.x, p.pose.y, ix, iy);
    const double lw = std::exp(p.log_weight);
    w[static_cast<size_t>(iy) * 20 + ix] += lw;
    s[static_cast<size_t>(iy) * 20 + ix] += lw * std::sin(p.pose.phi);
    c[static_cast<size_t>(iy) * 20 + ix] += lw * std::cos(p.pose.phi);
  }
  for (int iy = 0; iy < 20; ++iy)
    for (int ix = 0; ix < 20; ++ix) {
      const size_t k = static_cast<size_t>(iy) * 20 + ix;
      REQUIRE(bm.at(ix, iy, 1) == doctest::Approx(w[k]).epsilon(1e-12));
      REQUIRE(bm.at(ix, iy, 2) == doctest::Approx(s[k]).epsilon(1e-12));
      REQUIRE(bm.at(ix, iy, 3) == doctest::Approx(c[k]).epsilon(1e-12));
    }
}

TEST_CASE("project_particles: mass conservation and Cauchy-Schwarz invariant") {
  Rng rng(32);
  const OccupancyGrid grid = free_grid(30, 30);
  std::vector<Particle> particles;
  for (int i = 0; i < 500; ++i)
    particles.push_back({Pose{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(-kPi, kPi)},
                         rng.uniform(-3.0, 0.0)});
  ParticleSet ps = make_set(std::move(particles));
  const BeliefMap bm = project_particles(ps, grid);
  double mass = 0.0;
  for (int iy = 0; iy < 30; ++iy)
    for (int ix = 0; ix < 30; ++ix) {
      const double w = bm.at(ix, iy, 1);
      mass += w;
      // |sum w sin|, |sum w cos| can never exceed the cell's weight mass.
      CHECK(std::hypot(bm.at(ix, iy, 2), bm.at(ix, iy, 3)) <= w + 1e-12);
    }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("extract_modes: k=1 equals estimate_pose bitwise") {
  Rng rng(33);
  std::vector<Particle> particles;
  for (int i = 0; i < 50; ++i)
    particles.push_back({Pose{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-kPi, kPi)},
                         rng.uniform(-2.0, 0.0)});
  ParticleSet ps = make_set(std::move(particles));
  const auto modes = extract_modes(ps, 1);
  REQUIRE(modes.size() == 1);
  const Pose est = estimate_pose(ps);
  CHECK(modes[0].x == est.x);
  CHECK(modes[0].y == est.y);
  CHECK(modes[0].phi == est.phi);
}

TEST_CASE("extract_modes: two distant clusters found with k=2") {
  Rng rng(34);
  std::vector<Particle> particles;
  for (int i = 0; i < 100; ++i) {
    particles.push_back({Pose{0.5 + rng.normal(0.0, 1.0) * 0.05, 0.5 + rng.normal(0.0, 1.0) * 0.05, 0.1}, 0.0});
    particles.push_back(
        {Pose{5.5 + rng.normal(0.0, 1.0) * 0.05, 5.5 + rng.normal(0.0, 1.0) * 0.05, -2.0}, std::log(0.5)});
  }
  ParticleSet ps = make_set(std::move(particles));
  auto modes = extract_modes(ps, 2);
  REQUIRE(modes.size() == 2);
  // Heavier cluster (weight 2/3) first.
  CHECK(modes[0].x == doctest::Approx(0.5).epsilon(0.1));
  CHECK(modes[0].y == doctest::Approx(0.5).epsilon(0.1));
  CHECK(modes[0].phi == doctest::Approx(0.1).epsilon(0.1));
  CHECK(modes[1].x == doctest::Approx(5.5).epsilon(0.1));
  CHECK(modes[1].phi == doctest::Approx(-2.0).epsilon(0.1));
}

TEST_CASE("extract_modes: k larger than occupied bins returns all bins") {
  ParticleSet ps = make_set({{Pose{0.5, 0.5, 0.0}, 0.0}, {Pose{3.5, 3.5, 0.0}, 0.0}});
  const auto modes = extract_modes(ps, 10);
  CHECK(modes.size() == 2);
}

TEST_CASE("extract_modes: invariant to particle order") {
  Rng rng(35);
  std::vector<Particle> particles;
  for (int i = 0; i < 60; ++i)
    particles.push_back({Pose{rng.uniform(0, 6), rng.uniform(0, 6), rng.uniform(-kPi, kPi)},
                         rng.uniform(-2.0, 0.0)});
  ParticleSet fwd = make_set(particles);
  std::reverse(particles.begin(), particles.end());
  ParticleSet rev = make_set(particles);
  const auto ma = extract_modes(fwd, 3);
  const auto mb = extract_modes(rev, 3);
  REQUIRE(ma.size() == mb.size());
  for (size_t i = 0; i < ma.size(); ++i) {
    CHECK(ma[i].x == doctest::Approx(mb[i].x).epsilon(1e-12));
    CHECK(ma[i].y == doctest::Approx(mb[i].y).epsilon(1e-12));
    CHECK(ma[i].phi == doctest::Approx(mb[i].phi).epsilon(1e-12));
  }
}

TEST_CASE("extract_local_belief: identity crop at an axis-aligned cell center") {
  Rng rng(36);
  const OccupancyGrid grid = oracle::random_grid(rng, 21, 21, 0.1);
  std::vector<Particle> particles;
  for (int i = 0; i < 100; ++i)
    particles.push_back({Pose{rng.uniform(0, 2.1), rng.uniform(0, 2.1), rng.uniform(-kPi, kPi)},
                         rng.uniform(-1.0, 0.0)});
  ParticleSet ps = make_set(std::move(particles));
  const BeliefMap bm = project_particles(ps, grid);
  // Attend at the center cell (10, 10) with phi = 0: crop of the same size is
  // the belief map itself in all channels.
  const Pose attend{1.05, 1.05, 0.0};
  const LocalBelief lb = extract_local_belief(bm, grid, attend, 21);
  for (int iy = 0; iy < 21; ++iy)
    for (int ix = 0; ix < 21; ++ix)
      for (int ch = 0; ch < 4; ++ch)
        REQUIRE(lb.at(ix, iy, ch) == doctest::Approx(bm.at(ix, iy, ch)).epsilon(1e-12));
}

TEST_CASE("extract_local_belief: orientation channels re-expressed in the attention frame") {
  const OccupancyGrid grid = free_grid(21, 21);
  // One particle heading pi/2 at the center of cell (10, 10).
  ParticleSet ps = make_set({{Pose{1.05, 1.05, kPi / 2.0}, 0.0}});
  const BeliefMap bm = project_particles(ps, grid);
  // Attend at the same position with phi = pi/2: the particle's heading in
  // the attention frame is 0, so (sin, cos) becomes (0, 1).
  const LocalBelief lb = extract_local_belief(bm, grid, Pose{1.05, 1.05, kPi / 2.0}, 9);
  const int c = 4;
  CHECK(lb.at(c, c, 1) == doctest::Approx(1.0));
  CHECK(std::abs(lb.at(c, c, 2)) < 1e-12);
  CHECK(lb.at(c, c, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extract_local_belief: matches dense inverse-mapping oracle") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const OccupancyGrid grid = oracle::random_grid(rng, 30, 30, 0.1);
    std::vector<Particle> particles;
    for (int i = 0; i < 120; ++i)
      particles.push_back({Pose{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(-kPi, kPi)},
                           rng.uniform(-1.5, 0.0)});
    ParticleSet ps = make_set(std::move(particles));
    const BeliefMap bm = project_particles(ps, grid);
    const Pose attend{rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(-kPi, kPi)};
    const int size = 13;
    const LocalBelief lb = extract_local_belief(bm, grid, attend, size);
    const double sa = std::sin(attend.phi), ca = std::cos(attend.phi);
    for (int iy = 0; iy < size; ++iy)
      for (int ix = 0; ix < size; ++ix) {
        int gx, gy;
        const bool inside = oracle::crop_cell_source(grid, attend, size, ix, iy, gx, gy);
        for (int ch = 0; ch < 4; ++ch) {
          double want = 0.0;
          if (inside) {
            if (ch == 2)
              want = bm.at(gx, gy, 2) * ca - bm.at(gx, gy, 3) * sa;
            else if (ch == 3)
              want = bm.at(gx, gy, 3) * ca + bm.at(gx, gy, 2) * sa;
            else
              want = bm.at(gx, gy, ch);
          }
          REQUIRE(lb.at(ix, iy, ch) == doctest::Approx(want).epsilon(1e-12));
        }
      }
  }
}
