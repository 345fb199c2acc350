#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dse/embeddings.hpp"
#include "dse/env.hpp"
#include "dse/metrics.hpp"
#include "dse/optim.hpp"
#include "dse/policy.hpp"
#include "dse/popart.hpp"
#include "dse/rng.hpp"

namespace dse {

/// Which latent structure conditions the shared policy.
///  - kDse:    two tables, dynamics row i and goal row j
///  - kSingle: one table with a row per (i,j) pair, dim = z_dim + g_dim
///  - kNone:   latent-free (independent learners, flat/high-level policies)
enum class LatentMode { kDse, kSingle, kNone };
/// Latent noise drawn per environment step (default) or once per episode.
enum class LatentCadence { kPerStep, kPerEpisode };
/// Which trajectories the horizon cutoff applies to. Tail returns of episodes
/// stopped by the step cap are biased (missing future reward), so those steps
/// are dropped; episodes ending in a failure state have exact returns.
/// kAll drops the tail of every trajectory; kOff disables the cutoff.
enum class HCutoffMode { kTruncatedOnly, kAll, kOff };

LatentMode parse_latent_mode(const std::string& name);
std::string latent_mode_name(LatentMode m);
LatentCadence parse_latent_cadence(const std::string& name);
std::string latent_cadence_name(LatentCadence c);
HCutoffMode parse_h_cutoff_mode(const std::string& name);
std::string h_cutoff_mode_name(HCutoffMode m);

struct ReinforceSettings {
  double gamma = 0.99;
  double alpha_d = 50000.0;
  double alpha_r = 1000.0;
  double alpha_pi = std::numeric_limits<double>::infinity();
  int batch_m = 4;  // trajectories collected per cell per iteration
  double lr = 0.002;
  double lr_emb = 0.002;  // variational-table learning rate
  OptimizerKind optimizer = OptimizerKind::kAdam;
  bool popart = true;
  double beta_art = 0.02;
  int h_cutoff = 0;  // steps; 0 means round(1 / (1 - gamma))
  HCutoffMode h_mode = HCutoffMode::kTruncatedOnly;
  LatentMode latent_mode = LatentMode::kDse;
  LatentCadence cadence = LatentCadence::kPerStep;
  uint64_t run_seed = 0;
  int threads = 1;
  int metrics_every = 1;  // emit metrics rows every N iterations
};

/// Discounted backward recursion of the entropy-regularized returns:
/// R~_t = (r_t - (1/alpha_pi) log pi_t) + gamma * R~_{t+1}.
/// alpha_pi = inf drops the log-pi term exactly.
std::vector<double> regularized_returns(std::span<const double> rewards,
                                        std::span<const double> log_probs,
                                        double gamma, double alpha_pi);

/// Geometric sum (1 - gamma^(T-1)) / (1 - gamma) weighting the per-episode
/// KL penalties so they are commensurate with the summed score terms.
double geometric_kl_weight(double gamma, int max_episode_length);

/// Embedding rows feeding one trajectory's latents; null table pointers mean
/// that latent is absent.
struct LatentRefs {
  const VariationalEmbedding* qd = nullptr;
  BoundParams bd{};
  int qd_row = 0;
  const VariationalEmbedding* qw = nullptr;
  BoundParams bw{};
  int qw_row = 0;
};

/// Score-function term of one trajectory on the tape:
///   sum_t coeffs[t] * log pi_theta(a_t | s_t, z(eps_t), g(eps'_t)).
/// coeffs carries the (detached, normalized) returns and averaging weights;
/// only the first coeffs.size() steps are used, which is how the horizon
/// cutoff enters. Latents are taped through the embedding rows.
Var trajectory_score_loss(Tape& tape, const Policy& policy,
                          const BoundParams& theta, const LatentRefs& refs,
                          const Trajectory& traj, std::span<const double> coeffs,
                          LatentCadence cadence);

/// weight * mean over `rows` of KL(q(.|row) || prior), on the tape.
Var embedding_kl_penalty(Tape& tape, const VariationalEmbedding& emb,
                         const BoundParams& bound, std::span<const int> rows,
                         double weight);

/// Full batch loss on a single tape (used by gradient checks; the trainer
/// evaluates trajectory terms on per-trajectory tapes for memory reasons —
/// the gradients are identical by linearity):
///   -(1/N) sum_traj sum_t R~norm_t log pi_t
///   + (C/alpha_d) mean_i KL(q_d_i) + (C/alpha_r) mean_j KL(q_w_j)
/// where N = number of trajectories and coeffs_per_traj[k] holds the
/// truncated, normalized returns of batch[k].
Var reinforce_loss(Tape& tape, const Policy& policy, const BoundParams& theta,
                   const VariationalEmbedding* qd, const BoundParams& bd,
                   const VariationalEmbedding* qw, const BoundParams& bw,
                   std::span<const Trajectory> batch,
                   std::span<const std::vector<double>> coeffs_per_traj,
                   std::span<const int> qd_rows, std::span<const int> qw_rows,
                   const ReinforceSettings& cfg, int max_episode_length,
                   LatentCadence cadence);

/// One task cell: grid coordinates plus its environment instance.
struct TrainerCell {
  int i = 0;
  int j = 0;
  std::unique_ptr<Env> env;
};

/// On-policy multi-task trainer: per iteration, collects M trajectories per
/// cell (latents sampled from the variational rows), standardizes the
/// regularized returns per task, and applies one optimizer step each to the
/// embedding tables and the shared policy.
class ReinforceTrainer {
 public:
  /// grid_rows/grid_cols size the embedding tables: kDse uses a dynamics
  /// table with grid_rows rows and a goal table with grid_cols rows; kSingle
  /// uses one table with grid_rows*grid_cols rows of width z_dim+g_dim
  /// (held-out pairs keep their initialization). The policy's latent dims
  /// must match the mode.
  ReinforceTrainer(ReinforceSettings cfg, std::vector<TrainerCell> cells,
                   int grid_rows, int grid_cols, Policy policy, int z_dim,
                   int g_dim);

  std::vector<MetricsRow> iterate();

  Trajectory collect_trajectory(int cell_idx, uint64_t episode_index,
                                RngPurpose env_purpose = RngPurpose::kEnvReset,
                                RngPurpose action_purpose = RngPurpose::kAction,
                                RngPurpose latent_purpose = RngPurpose::kLatent);

  /// Mean raw episodic return over fresh episodes on evaluation RNG streams
  /// (training streams are untouched).
  double evaluate_cell(int cell_idx, int episodes);

  /// Freezes/updates which parameter groups the optimizer steps touch;
  /// used by retraining recipes that keep the shared policy fixed.
  bool train_policy = true;
  bool train_embeddings = true;
  /// When set, only these embedding rows receive KL penalties and updates
  /// restricted by gradient masking is unnecessary: rows not reached by any
  /// collected trajectory and not in the KL sets keep zero gradients.
  std::optional<std::vector<int>> kl_rows_qd;
  std::optional<std::vector<int>> kl_rows_qw;

  ReinforceSettings cfg;
  std::vector<TrainerCell> cells;
  int grid_rows = 0;
  int grid_cols = 0;
  Policy policy;
  VariationalEmbedding qd;  // kDse: dynamics table; kSingle: the pair table
  VariationalEmbedding qw;  // kDse only
  Optimizer opt_theta, opt_qd, opt_qw;
  std::vector<PopArt> popart;          // per cell
  std::vector<int64_t> episode_count;  // per cell
  int64_t iteration = 0;

  int qd_row_for(const TrainerCell& c) const;
  int h_cutoff_steps() const;
  int max_episode_length() const;
  double latest_mean_return(int cell_idx) const {
    return last_mean_return_[cell_idx];
  }

 private:
  void accumulate_trajectory_grads(const Trajectory& traj,
                                   std::span<const double> coeffs,
                                   double* loss_value);
  void accumulate_kl_grads(double* loss_value);

  Tape tape_;
  std::vector<double> last_mean_return_;
  std::vector<int> kl_set_qd_, kl_set_qw_;
};

/// Rolls out a policy with fixed latent values (no embedding sampling).
/// greedy: argmax logits / tanh(mean) instead of sampling.
Trajectory rollout_policy(Env& env, const Policy& policy,
                          std::span<const double> z, std::span<const double> g,
                          uint64_t env_seed, uint64_t action_seed, bool greedy);

}  // namespace dse
