#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dse/checkpoint.hpp"
#include "dse/config.hpp"
#include "dse/hrl.hpp"
#include "dse/reinforce.hpp"
#include "dse/sac.hpp"
#include "dse/task_grid.hpp"

namespace dse {

/// Root for all run outputs: $DSE_OUTPUT_ROOT if set, else the working
/// directory. Run artifacts land in root / cfg.output_dir.
std::filesystem::path output_root();
std::filesystem::path prepare_run_dir(const ExperimentConfig& cfg);

/// Policy construction per algorithm: latent dims follow the latent mode
/// (kSingle folds z and g into one block; kNone is state-only).
Policy build_policy(const ExperimentConfig& cfg, bool discrete, int s_dim,
                    int act_dim, LatentMode mode, uint64_t init_i = 0,
                    uint64_t init_j = 0);

std::unique_ptr<ReinforceTrainer> build_reinforce_trainer(
    const ExperimentConfig& cfg, const TaskGrid& grid);
std::unique_ptr<SacTrainer> build_sac_trainer(const ExperimentConfig& cfg,
                                              const TaskGrid& grid);

// -- checkpoint converters ---------------------------------------------------
// Parameters, embedding tables, optimizer moments, normalizer moments and
// episode counters are saved; replay memories and mid-episode environment
// state are not (a restored off-policy run re-warms its buffers).
CheckpointData snapshot_reinforce(const ReinforceTrainer& t,
                                  const std::string& config_text);
void restore_reinforce(ReinforceTrainer& t, const CheckpointData& d);
CheckpointData snapshot_sac(const SacTrainer& t, const std::string& config_text);
void restore_sac(SacTrainer& t, const CheckpointData& d);

/// Frozen artifacts of a finished run, rebuilt from a checkpoint alone.
struct FrozenRun {
  ExperimentConfig cfg;
  TaskGrid grid;
  LatentMode mode = LatentMode::kDse;
  Policy policy;
  VariationalEmbedding qd;  // dynamics table (or the pair table for kSingle)
  VariationalEmbedding qw;  // goal table (kDse only)
};
FrozenRun load_frozen_run(const std::string& checkpoint_path);

/// Mean of per-episode final tip-to-goal distances under the greedy policy
/// with latents fixed at the given values (fresh env instances; training
/// streams untouched).
double eval_final_distance(const TaskGrid& grid, int i, int j,
                           const Policy& policy, std::span<const double> z,
                           std::span<const double> g, int episodes,
                           uint64_t seed);

/// Mean return of uniformly random actions (the floor for "better than
/// random" comparisons).
double random_policy_return(Env& env, int episodes, uint64_t seed);

// -- recipes -----------------------------------------------------------------
// Each writes metrics.csv / timings.csv / latents.csv / checkpoint.txt (plus
// recipe-specific files) under its run directory. Errors surface as
// ConfigError or TrainingDiverged; the CLI maps them to exit codes 2 and 3.
void run_experiment(const ExperimentConfig& cfg);
void run_retrain(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                 const std::vector<std::pair<int, int>>& cells);
void run_interpolate(const std::string& checkpoint_path, const std::string& space,
                     const std::vector<std::vector<double>>& points,
                     int other_row, int env_i, int env_j, int episodes,
                     const std::string& output_dir);
void run_fit_unseen(const std::string& checkpoint_path,
                    const std::vector<double>& dynamics,
                    const std::vector<double>& goal, std::int64_t iterations,
                    std::int64_t seed, const std::string& output_dir);

/// "i,j;i,j" (the retrain --cells grammar); throws ConfigError on junk.
std::vector<std::pair<int, int>> parse_cell_list(const std::string& text);

}  // namespace dse
