#include "apfl/pfilter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace apfl {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void ParticleSet::normalize() {
  if (particles.empty()) throw std::invalid_argument("ParticleSet: empty");
  double max_lw = kNegInf;
  for (const auto& p : particles) max_lw = std::max(max_lw, p.log_weight);
  if (max_lw == kNegInf) throw std::runtime_error("belief collapsed: all weights zero");
  double sum = 0.0;
  for (const auto& p : particles) sum += std::exp(p.log_weight - max_lw);
  const double log_z = max_lw + std::log(sum);
  for (auto& p : particles) p.log_weight -= log_z;
  normalized = true;
}

std::vector<double> ParticleSet::linear_weights() const {
  std::vector<double> w(particles.size());
  for (size_t i = 0; i < particles.size(); ++i) w[i] = std::exp(particles[i].log_weight);
  return w;
}

void predict(ParticleSet& ps, const OdomDelta& odom, const FilterConfig& cfg, Rng& rng) {
  for (auto& p : ps.particles) {
    const double dx = odom.dx + (cfg.trans_noise_xy > 0 ? rng.normal(0.0, cfg.trans_noise_xy) : 0.0);
    const double dy = odom.dy + (cfg.trans_noise_xy > 0 ? rng.normal(0.0, cfg.trans_noise_xy) : 0.0);
    const double dphi =
        odom.dphi + (cfg.trans_noise_phi > 0 ? rng.normal(0.0, cfg.trans_noise_phi) : 0.0);
    p.pose = p.pose.compose(dx, dy, dphi);
  }
}

OccupancyGrid extract_local_map(const OccupancyGrid& grid, const Pose& pose, int size) {
  if (size % 2 == 0) throw std::invalid_argument("extract_local_map: size must be odd");
  const int c = size / 2;
  const double res = grid.resolution();
  std::vector<CellCode> cells(static_cast<size_t>(size) * size, CellCode::Unexplored);
  const double cphi = std::cos(pose.phi), sphi = std::sin(pose.phi);
  for (int iy = 0; iy < size; ++iy) {
    for (int ix = 0; ix < size; ++ix) {
      const double u = (ix - c) * res, v = (iy - c) * res;
      const double wx = pose.x + cphi * u - sphi * v;
      const double wy = pose.y + sphi * u + cphi * v;
      int gx, gy;
      grid.world_to_cell(wx, wy, gx, gy);
      if (grid.in_bounds(gx, gy))
        cells[static_cast<size_t>(iy) * size + ix] = grid.at(gx, gy);
    }
  }
  Pose origin;
  origin.x = -(c + 0.5) * res;
  origin.y = -(c + 0.5) * res;
  return OccupancyGrid(size, size, res, origin, std::move(cells));
}

double pose_log_likelihood(const Pose& pose, const LidarScan& scan,
                           const DistanceField& dfield, const FilterConfig& cfg) {
  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma_lhood * cfg.sigma_lhood);
  const double cphi = std::cos(pose.phi), sphi = std::sin(pose.phi);
  double ll = 0.0;
  for (int b = 0; b < scan.n_beams; ++b) {
    const double r = scan.ranges[b];
    if (r >= scan.max_range) continue;
    const double a = scan.beam_angle(b);
    const double lx = r * std::cos(a), ly = r * std::sin(a);
    const double ex = pose.x + cphi * lx - sphi * ly;
    const double ey = pose.y + sphi * lx + cphi * ly;
    // An endpoint outside the mapped area cannot be explained by the map;
    // scoring it via the clamped border cell would reward poses that throw
    // endpoints off the map, so it only receives the floor likelihood.
    if (!dfield.contains(ex, ey)) {
      ll += std::log(cfg.eps_floor);
      continue;
    }
    const double d = dfield.sample(ex, ey);
    ll += std::log(std::exp(-d * d * inv_two_sigma_sq) + cfg.eps_floor);
  }
  return ll;
}

void update_weights(ParticleSet& ps, const LidarScan& scan, const DistanceField& dfield,
                    const OccupancyGrid& grid, const FilterConfig& cfg) {
  (void)grid;
  for (auto& p : ps.particles) p.log_weight += pose_log_likelihood(p.pose, scan, dfield, cfg);
  ps.normalize();
}

void soft_resample(ParticleSet& ps, double alpha, Rng& rng, bool systematic) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("soft_resample: alpha must be in [0, 1]");
  if (!ps.normalized) throw std::invalid_argument("soft_resample: particle set not normalized");
  const size_t K = ps.size();
  const auto w = ps.linear_weights();

  std::vector<double> q(K), cdf(K);
  double acc = 0.0;
  for (size_t k = 0; k < K; ++k) {
    q[k] = alpha * w[k] + (1.0 - alpha) / static_cast<double>(K);
    acc += q[k];
    cdf[k] = acc;
  }
  cdf[K - 1] = std::max(cdf[K - 1], 1.0);  // guard against rounding at the top

  auto draw_index = [&](double u) {
    return static_cast<size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  std::vector<Particle> out(K);
  const double u0 = systematic ? rng.uniform() / static_cast<double>(K) : 0.0;
  for (size_t m = 0; m < K; ++m) {
    const double u = systematic ? u0 + static_cast<double>(m) / static_cast<double>(K)
                                : rng.uniform();
    const size_t k = std::min(draw_index(u), K - 1);
    out[m].pose = ps.particles[k].pose;
    // w/q correction in log domain; exact 0 when alpha == 1.
    out[m].log_weight =
        alpha == 1.0 ? 0.0 : ps.particles[k].log_weight - std::log(q[k]);
  }
  ps.particles = std::move(out);
  ps.normalized = false;
  ps.normalize();
}

Pose estimate_pose(const ParticleSet& ps) {
  if (!ps.normalized) throw std::invalid_argument("estimate_pose: particle set not normalized");
  double x = 0.0, y = 0.0, s = 0.0, c = 0.0;
  for (const auto& p : ps.particles) {
    const double w = std::exp(p.log_weight);
    x += w * p.pose.x;
    y += w * p.pose.y;
    s += w * std::sin(p.pose.phi);
    c += w * std::cos(p.pose.phi);
  }
  if (std::abs(s) < 1e-12 && std::abs(c) < 1e-12)
    throw std::runtime_error("orientation undefined: antipodal belief");
  return Pose{x, y, wrap_angle(std::atan2(s, c))};
}

double pose_loss(const Pose& est, const Pose& truth, double beta) {
  const double dx = est.x - truth.x;
  const double dy = est.y - truth.y;
  const double dphi = wrap_angle(est.phi - truth.phi);
  return dx * dx + dy * dy + beta * dphi * dphi;
}

GradientReport gradient_check(const std::vector<Pose>& poses, const std::vector<double>& weights,
                              const std::vector<int>& draws, const Pose& truth, double alpha,
                              double beta, double fd_step) {
  const size_t K = weights.size();
  if (poses.size() != K) throw std::invalid_argument("gradient_check: size mismatch");

  // Forward map: weights -> q -> corrected draw weights -> normalized
  // estimate -> loss, with the drawn indices held fixed.
  auto forward = [&](const std::vector<double>& w) {
    std::vector<double> q(K), c(draws.size());
    for (size_t k = 0; k < K; ++k) q[k] = alpha * w[k] + (1.0 - alpha) / static_cast<double>(K);
    double S = 0.0;
    for (size_t m = 0; m < draws.size(); ++m) {
      c[m] = w[draws[m]] / q[draws[m]];
      S += c[m];
    }
    double x = 0.0, y = 0.0, sn = 0.0, cs = 0.0;
    for (size_t m = 0; m < draws.size(); ++m) {
      const double wm = c[m] / S;
      const Pose& p = poses[draws[m]];
      x += wm * p.x;
      y += wm * p.y;
      sn += wm * std::sin(p.phi);
      cs += wm * std::cos(p.phi);
    }
    const Pose est{x, y, wrap_angle(std::atan2(sn, cs))};
    return pose_loss(est, truth, beta);
  };

  // Analytic gradient via the chain rule through q, the w/q correction, the
  // normalization, the weighted sums and atan2.
  std::vector<double> grad(K, 0.0);
  {
    std::vector<double> q(K), c(draws.size());
    for (size_t k = 0; k < K; ++k) q[k] = alpha * weights[k] + (1.0 - alpha) / static_cast<double>(K);
    double S = 0.0;
    for (size_t m = 0; m < draws.size(); ++m) {
      c[m] = weights[draws[m]] / q[draws[m]];
      S += c[m];
    }
    double x = 0.0, y = 0.0, sn = 0.0, cs = 0.0;
    for (size_t m = 0; m < draws.size(); ++m) {
      const double wm = c[m] / S;
      const Pose& p = poses[draws[m]];
      x += wm * p.x;
      y += wm * p.y;
      sn += wm * std::sin(p.phi);
      cs += wm * std::cos(p.phi);
    }
    const double phi_hat = std::atan2(sn, cs);
    const double ex = x - truth.x, ey = y - truth.y;
    const double ephi = wrap_angle(phi_hat - truth.phi);

    for (size_t i = 0; i < K; ++i) {
      // dc_m/dw_i is nonzero only for slots that drew particle i.
      const double dci = ((1.0 - alpha) / static_cast<double>(K)) / (q[i] * q[i]);
      double dS = 0.0;
      double dx = 0.0, dy = 0.0, dsn = 0.0, dcs = 0.0;
      for (size_t m = 0; m < draws.size(); ++m) {
        if (static_cast<size_t>(draws[m]) != i) continue;
        dS += dci;
        const Pose& p = poses[draws[m]];
        dx += dci * p.x;
        dy += dci * p.y;
        dsn += dci * std::sin(p.phi);
        dcs += dci * std::cos(p.phi);
      }
      // d(c_m/S) terms: direct part already in dx..., subtract the S part.
      dx = dx / S - x * dS / S;
      dy = dy / S - y * dS / S;
      dsn = dsn / S - sn * dS / S;
      dcs = dcs / S - cs * dS / S;
      const double dphi = (cs * dsn - sn * dcs) / (sn * sn + cs * cs);
      grad[i] = 2.0 * ex * dx + 2.0 * ey * dy + 2.0 * beta * ephi * dphi;
    }
  }

  GradientReport rep;
  rep.analytic = grad;
  rep.numeric.resize(K);
  double norm_sq = 0.0;
  for (size_t i = 0; i < K; ++i) norm_sq += grad[i] * grad[i];
  rep.grad_norm = std::sqrt(norm_sq);

  for (size_t i = 0; i < K; ++i) {
    std::vector<double> wp = weights, wm = weights;
    wp[i] += fd_step;
    wm[i] -= fd_step;
    rep.numeric[i] = (forward(wp) - forward(wm)) / (2.0 * fd_step);
    const double scale = std::max({std::abs(grad[i]), std::abs(rep.numeric[i]), 1e-8});
    rep.max_rel_error = std::max(rep.max_rel_error, std::abs(grad[i] - rep.numeric[i]) / scale);
  }
  return rep;
}

std::string dump_filter_state(const ParticleSet& ps, int step, double alpha) {
  std::ostringstream os;
  os.precision(17);
  os << "# step " << step << " alpha " << alpha << "\n";
  for (const auto& p : ps.particles)
    os << p.pose.x << " " << p.pose.y << " " << p.pose.phi << " " << p.log_weight << "\n";
  return os.str();
}

}  // namespace apfl
