// Command-line front end: run / retrain / interpolate / fit-unseen.
// Exit codes: 0 success, 2 configuration error, 3 training divergence.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dse/config.hpp"
#include "dse/errors.hpp"
#include "dse/harness.hpp"

namespace {

std::vector<std::vector<double>> load_points_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dse::ConfigError("cannot open points file: " + path);
  std::vector<std::vector<double>> points;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    points.push_back(dse::parse_double_list(line));
  }
  if (points.empty()) throw dse::ConfigError("points file is empty: " + path);
  return points;
}

dse::ExperimentConfig load_with_overrides(const std::string& config_path,
                                          const std::optional<std::int64_t>& seed,
                                          const std::optional<std::string>& output,
                                          const std::optional<std::int64_t>& iters) {
  dse::ExperimentConfig cfg = dse::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (output) cfg.output_dir = *output;
  if (iters) cfg.iterations = *iters;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task RL trainer with disentangled task embeddings"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, cells_text, space = "g";
  std::string points_path, dynamics_text, goal_text, out_dir;
  std::optional<std::int64_t> seed_override, iters_override;
  std::optional<std::string> output_override;
  int row = 0, env_i = 0, env_j = 0, episodes = 10;
  std::int64_t fit_iters = -1, fit_seed = -1;

  auto* run = app.add_subcommand("run", "Train the configured experiment");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--seed", seed_override, "Override run.seed");
  run->add_option("--output", output_override, "Override run.output_dir");
  run->add_option("--iterations", iters_override, "Override run.iterations");

  auto* retrain = app.add_subcommand(
      "retrain", "Fine-tune a checkpoint on held-out grid cells");
  retrain->add_option("config", config_path, "Config file")->required();
  retrain->add_option("checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  retrain->add_option("--cells", cells_text, "Held-out cells, \"i,j;i,j\"")
      ->required();
  retrain->add_option("--seed", seed_override, "Override run.seed");
  retrain->add_option("--output", output_override, "Override run.output_dir");
  retrain->add_option("--iterations", iters_override, "Override run.iterations");

  auto* interp = app.add_subcommand(
      "interpolate", "Roll out the frozen policy at fixed latent points");
  interp->add_option("checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  interp->add_option("--space", space, "Latent space to sweep: z or g");
  interp->add_option("--points", points_path, "File, one latent vector per line")
      ->required();
  interp->add_option("--row", row, "Table row fixing the other latent's mean");
  interp->add_option("--env-i", env_i, "Evaluation cell dynamics index");
  interp->add_option("--env-j", env_j, "Evaluation cell goal index");
  interp->add_option("--episodes", episodes, "Evaluation episodes per point");
  interp->add_option("--out", out_dir, "Output directory under the run root")
      ->default_val("interpolate");

  auto* fit = app.add_subcommand(
      "fit-unseen", "Fit fresh embeddings to a new task, policy frozen");
  fit->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  fit->add_option("--dynamics", dynamics_text, "Dynamics parameters, comma list")
      ->required();
  fit->add_option("--goal", goal_text, "Goal parameters, comma list")
      ->required();
  fit->add_option("--iterations", fit_iters, "Training budget (default: config)");
  fit->add_option("--seed", fit_seed, "Run seed (default: checkpoint's)");
  fit->add_option("--out", out_dir, "Output directory under the run root")
      ->default_val("fit-unseen");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      dse::run_experiment(load_with_overrides(config_path, seed_override,
                                              output_override, iters_override));
    } else if (retrain->parsed()) {
      dse::run_retrain(load_with_overrides(config_path, seed_override,
                                           output_override, iters_override),
                       checkpoint_path, dse::parse_cell_list(cells_text));
    } else if (interp->parsed()) {
      dse::run_interpolate(checkpoint_path, space, load_points_file(points_path),
                           row, env_i, env_j, episodes, out_dir);
    } else if (fit->parsed()) {
      dse::run_fit_unseen(checkpoint_path, dse::parse_double_list(dynamics_text),
                          dse::parse_double_list(goal_text), fit_iters, fit_seed,
                          out_dir);
    }
  } catch (const dse::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const dse::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
