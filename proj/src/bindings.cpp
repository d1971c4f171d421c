// pybind11 module exposing the main operations of the C++ core.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "apfl/harness.hpp"

namespace py = pybind11;
using namespace apfl;

namespace {

py::array_t<double> belief_to_array(const BeliefMap& bm) {
  py::array_t<double> out({bm.height, bm.width, 4});
  auto r = out.mutable_unchecked<3>();
  for (int iy = 0; iy < bm.height; ++iy)
    for (int ix = 0; ix < bm.width; ++ix)
      for (int ch = 0; ch < 4; ++ch) r(iy, ix, ch) = bm.at(ix, iy, ch);
  return out;
}

py::array_t<std::uint8_t> grid_to_array(const OccupancyGrid& g) {
  py::array_t<std::uint8_t> out({g.height(), g.width()});
  auto r = out.mutable_unchecked<2>();
  for (int iy = 0; iy < g.height(); ++iy)
    for (int ix = 0; ix < g.width(); ++ix) r(iy, ix) = static_cast<std::uint8_t>(g.at(ix, iy));
  return out;
}

}  // namespace

PYBIND11_MODULE(_apfl, m) {
  m.doc() = "Active localization laboratory: particle filtering, belief maps, "
            "policies and the episode harness.";

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](double x, double y, double phi) { return Pose{x, y, phi}; }),
           py::arg("x"), py::arg("y"), py::arg("phi"))
      .def_readwrite("x", &Pose::x)
      .def_readwrite("y", &Pose::y)
      .def_readwrite("phi", &Pose::phi)
      .def("compose", &Pose::compose, py::arg("dx"), py::arg("dy"), py::arg("dphi"))
      .def("__repr__", [](const Pose& p) {
        return "Pose(x=" + std::to_string(p.x) + ", y=" + std::to_string(p.y) +
               ", phi=" + std::to_string(p.phi) + ")";
      });

  m.def("wrap_angle", &wrap_angle, py::arg("phi"));

  py::class_<Rng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed"));

  py::class_<OccupancyGrid>(m, "OccupancyGrid")
      .def_property_readonly("width", &OccupancyGrid::width)
      .def_property_readonly("height", &OccupancyGrid::height)
      .def_property_readonly("resolution", &OccupancyGrid::resolution)
      .def("cells", &grid_to_array, "Cell codes as a (height, width) uint8 array.")
      .def("serialize", [](const OccupancyGrid& g) { return serialize_map(g); });

  m.def("parse_map", &parse_map, py::arg("text"), py::arg("name") = "<string>");
  m.def("load_map", &load_map, py::arg("path"));
  m.def("save_map", &save_map, py::arg("grid"), py::arg("path"));
  m.def(
      "generate_floorplan",
      [](int width, int height, double resolution, std::uint64_t seed) {
        Rng rng(seed);
        return generate_floorplan(width, height, resolution, rng);
      },
      py::arg("width"), py::arg("height"), py::arg("resolution"), py::arg("seed"));

  py::class_<DistanceField>(m, "DistanceField")
      .def("sample", &DistanceField::sample, py::arg("x"), py::arg("y"));
  m.def("distance_transform", &distance_transform, py::arg("grid"));

  m.def("raycast", &raycast, py::arg("grid"), py::arg("from_pose"), py::arg("angle"),
        py::arg("max_range"));

  py::class_<LidarScan>(m, "LidarScan")
      .def_readonly("n_beams", &LidarScan::n_beams)
      .def_readonly("fov", &LidarScan::fov)
      .def_readonly("max_range", &LidarScan::max_range)
      .def_readonly("ranges", &LidarScan::ranges);
  m.def("sense", &sense, py::arg("pose"), py::arg("grid"), py::arg("n_beams"), py::arg("fov"),
        py::arg("max_range"));

  py::class_<OdomDelta>(m, "OdomDelta")
      .def(py::init([](double dx, double dy, double dphi) { return OdomDelta{dx, dy, dphi}; }),
           py::arg("dx") = 0.0, py::arg("dy") = 0.0, py::arg("dphi") = 0.0)
      .def_readwrite("dx", &OdomDelta::dx)
      .def_readwrite("dy", &OdomDelta::dy)
      .def_readwrite("dphi", &OdomDelta::dphi);

  py::class_<FilterConfig>(m, "FilterConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &FilterConfig::alpha)
      .def_readwrite("beta", &FilterConfig::beta)
      .def_readwrite("sigma_lhood", &FilterConfig::sigma_lhood)
      .def_readwrite("trans_noise_xy", &FilterConfig::trans_noise_xy)
      .def_readwrite("trans_noise_phi", &FilterConfig::trans_noise_phi)
      .def_readwrite("eps_floor", &FilterConfig::eps_floor)
      .def_readwrite("local_map_size", &FilterConfig::local_map_size)
      .def_readwrite("systematic_resampling", &FilterConfig::systematic_resampling);

  py::class_<ParticleSet>(m, "ParticleSet")
      .def(py::init([](const std::vector<Pose>& poses, const std::vector<double>& log_weights) {
             if (poses.size() != log_weights.size())
               throw py::value_error("poses and log_weights must have the same length");
             ParticleSet ps;
             ps.particles.resize(poses.size());
             for (size_t i = 0; i < poses.size(); ++i)
               ps.particles[i] = Particle{poses[i], log_weights[i]};
             return ps;
           }),
           py::arg("poses"), py::arg("log_weights"))
      .def_property_readonly("size", &ParticleSet::size)
      .def("normalize", &ParticleSet::normalize)
      .def("poses",
           [](const ParticleSet& ps) {
             py::array_t<double> out({static_cast<py::ssize_t>(ps.size()), py::ssize_t(3)});
             auto r = out.mutable_unchecked<2>();
             for (size_t i = 0; i < ps.size(); ++i) {
               r(i, 0) = ps.particles[i].pose.x;
               r(i, 1) = ps.particles[i].pose.y;
               r(i, 2) = ps.particles[i].pose.phi;
             }
             return out;
           },
           "Particle poses as an (n, 3) array of x, y, phi.")
      .def("log_weights", [](const ParticleSet& ps) {
        py::array_t<double> out(static_cast<py::ssize_t>(ps.size()));
        auto r = out.mutable_unchecked<1>();
        for (size_t i = 0; i < ps.size(); ++i) r(i) = ps.particles[i].log_weight;
        return out;
      });

  m.def("predict", &predict, py::arg("particles"), py::arg("odom"), py::arg("config"),
        py::arg("rng"));
  m.def("update_weights", &update_weights, py::arg("particles"), py::arg("scan"),
        py::arg("dfield"), py::arg("grid"), py::arg("config"));
  m.def("pose_log_likelihood", &pose_log_likelihood, py::arg("pose"), py::arg("scan"),
        py::arg("dfield"), py::arg("config"));
  m.def("soft_resample", &soft_resample, py::arg("particles"), py::arg("alpha"), py::arg("rng"),
        py::arg("systematic") = true);
  m.def("estimate_pose", &estimate_pose, py::arg("particles"));
  m.def("pose_loss", &pose_loss, py::arg("estimate"), py::arg("truth"), py::arg("beta"));
  m.def("compute_reward", &compute_reward, py::arg("loss"), py::arg("collided"),
        py::arg("lambda_c"));
  m.def("extract_local_map", &extract_local_map, py::arg("grid"), py::arg("pose"),
        py::arg("size"));

  py::class_<GradientReport>(m, "GradientReport")
      .def_readonly("max_rel_error", &GradientReport::max_rel_error)
      .def_readonly("grad_norm", &GradientReport::grad_norm)
      .def_readonly("analytic", &GradientReport::analytic)
      .def_readonly("numeric", &GradientReport::numeric);
  m.def("gradient_check", &gradient_check, py::arg("poses"), py::arg("weights"), py::arg("draws"),
        py::arg("truth"), py::arg("alpha"), py::arg("beta"), py::arg("fd_step") = 1e-6);

  m.def(
      "project_particles",
      [](const ParticleSet& ps, const OccupancyGrid& grid) {
        return belief_to_array(project_particles(ps, grid));
      },
      py::arg("particles"), py::arg("grid"),
      "Belief map as a (height, width, 4) array: occupancy, weight, "
      "weighted sin(phi), weighted cos(phi).");
  m.def(
      "extract_modes",
      [](const ParticleSet& ps, int k) { return extract_modes(ps, k); }, py::arg("particles"),
      py::arg("k"));

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("true_pose", &StepRecord::true_pose)
      .def_readonly("estimate", &StepRecord::estimate)
      .def_readonly("loss", &StepRecord::loss)
      .def_readonly("reward", &StepRecord::reward)
      .def_readonly("collided", &StepRecord::collided);

  py::class_<EpisodeResult>(m, "EpisodeResult")
      .def_readonly("steps", &EpisodeResult::steps)
      .def_readonly("final_pos_error", &EpisodeResult::final_pos_error)
      .def_readonly("final_orient_error", &EpisodeResult::final_orient_error)
      .def_readonly("seed", &EpisodeResult::seed);

  m.def(
      "run_episode",
      [](const OccupancyGrid& grid, const std::string& task, const std::string& policy, int T,
         std::uint64_t seed, const std::string& policy_file) {
        const DistanceField dfield = distance_transform(grid);
        const TaskSpec spec = TaskSpec::defaults(task_from_string(task), T);
        PolicySpec pol;
        pol.kind = policy_from_string(policy);
        if (pol.kind == PolicyKind::Learned) {
          if (policy_file.empty())
            throw py::value_error("policy 'learned' requires policy_file");
          pol.params = load_policy(policy_file);
        }
        ExperimentSettings s;
        return run_episode(grid, dfield, spec, pol, s.episode(), seed);
      },
      py::arg("grid"), py::arg("task"), py::arg("policy"), py::arg("T"), py::arg("seed"),
      py::arg("policy_file") = std::string(),
      "Run one episode with default settings; task is tracking/semiglobal/"
      "global, policy is turn/avoid/goalnav/learned/idle.");

  m.def(
      "render_trajectory",
      [](const EpisodeResult& r, const OccupancyGrid& grid) { return render_trajectory(r, grid); },
      py::arg("result"), py::arg("grid"), "SVG string of an episode.");
}
