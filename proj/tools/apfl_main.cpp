#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "apfl/harness.hpp"

namespace {

constexpr int kExitConfigError = 1;
constexpr int kExitEpisodeFailure = 2;

apfl::ExperimentSettings load_settings(const std::string& config_path) {
  if (config_path.empty()) return apfl::settings_from_config(apfl::Config::parse(""));
  return apfl::settings_from_config(apfl::Config::load(config_path));
}

int cmd_run(const std::string& config_path) {
  const auto s = load_settings(config_path);
  return apfl::run_experiment(s);
}

int cmd_train(const std::string& config_path, const std::string& out_policy) {
  auto s = load_settings(config_path);
  if (!out_policy.empty()) s.policy_file = out_policy;
  if (s.policy_file.empty()) s.policy_file = "policy.apfn";
  const auto result = apfl::train_policy(s);
  std::cout << "best return " << result.best_return << ", policy written to " << s.policy_file
            << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& policy_name,
             const std::string& policy_file) {
  auto s = load_settings(config_path);
  s.policies = {apfl::policy_from_string(policy_name)};
  if (!policy_file.empty()) s.policy_file = policy_file;
  const int status = apfl::run_experiment(s);
  std::ifstream summary(s.out_dir + "/summary.txt");
  std::cout << summary.rdbuf();
  return status;
}

int cmd_render(const std::string& config_path, const std::string& map_path,
               const std::string& policy_name, const std::string& task_name,
               std::uint64_t seed, const std::string& out_path) {
  auto s = load_settings(config_path);
  const apfl::OccupancyGrid grid = apfl::load_map(map_path);
  const apfl::DistanceField dfield = apfl::distance_transform(grid);
  apfl::TaskSpec task = apfl::TaskSpec::defaults(apfl::task_from_string(task_name), s.T);
  apfl::PolicySpec pol;
  pol.kind = apfl::policy_from_string(policy_name);
  if (pol.kind == apfl::PolicyKind::Learned) pol.params = apfl::load_policy(s.policy_file);
  const auto result = apfl::run_episode(grid, dfield, task, pol, s.episode(), seed);
  std::ofstream out(out_path, std::ios::binary);
  out << apfl::render_trajectory(result, grid);
  std::cout << "wrote " << out_path << " (final position error "
            << 100.0 * result.final_pos_error << " cm)\n";
  return 0;
}

int cmd_maps_generate(const std::string& config_path) {
  const auto s = load_settings(config_path);
  const auto paths = apfl::generate_map_corpus(s);
  for (const auto& p : paths) std::cout << p << "\n";
  return 0;
}

}  // namespace

int run_selftest();  // defined in selftest.cpp

int main(int argc, char** argv) {
  CLI::App app{"Active localization laboratory: particle filter, belief maps, policies"};
  app.require_subcommand(1);

  std::string config_path, out_policy, policy_name = "goalnav", policy_file;
  std::string map_path, task_name = "tracking", out_path = "trajectory.svg";
  std::uint64_t seed = 1;

  auto* run = app.add_subcommand("run", "Run the experiment matrix from a config file");
  run->add_option("config", config_path, "Config file")->required();

  auto* train = app.add_subcommand("train", "Train the active policy (CEM)");
  train->add_option("config", config_path, "Config file")->required();
  train->add_option("-o,--out", out_policy, "Output policy file");

  auto* eval = app.add_subcommand("eval", "Evaluate a single policy");
  eval->add_option("config", config_path, "Config file")->required();
  eval->add_option("-p,--policy", policy_name, "turn|avoid|goalnav|learned|idle");
  eval->add_option("--policy-file", policy_file, "Trained policy file (learned)");

  auto* render = app.add_subcommand("render", "Render one episode trajectory as SVG");
  render->add_option("map", map_path, "Map file (.ogmap)")->required();
  render->add_option("-c,--config", config_path, "Config file");
  render->add_option("-p,--policy", policy_name, "Policy name");
  render->add_option("-t,--task", task_name, "tracking|semiglobal|global");
  render->add_option("-s,--seed", seed, "Episode seed");
  render->add_option("-o,--out", out_path, "Output SVG path");

  auto* maps = app.add_subcommand("maps", "Map corpus utilities");
  auto* maps_gen = maps->add_subcommand("generate", "Generate the map corpus");
  maps_gen->add_option("config", config_path, "Config file");

  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (train->parsed()) return cmd_train(config_path, out_policy);
    if (eval->parsed()) return cmd_eval(config_path, policy_name, policy_file);
    if (render->parsed())
      return cmd_render(config_path, map_path, policy_name, task_name, seed, out_path);
    if (maps_gen->parsed()) return cmd_maps_generate(config_path);
    if (selftest->parsed()) return run_selftest();
  } catch (const apfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const apfl::MapParseError& e) {
    std::cerr << "map error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const apfl::EpisodeError& e) {
    std::cerr << "episode failure: " << e.what() << "\n";
    return kExitEpisodeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEpisodeFailure;
  }
  return 0;
}
