#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "dse/embeddings.hpp"
#include "dse/env.hpp"
#include "dse/metrics.hpp"
#include "dse/mlp.hpp"
#include "dse/optim.hpp"
#include "dse/policy.hpp"
#include "dse/reinforce.hpp"  // LatentMode/LatentCadence/TrainerCell
#include "dse/replay.hpp"
#include "dse/rng.hpp"

namespace dse {

struct SacSettings {
  double gamma = 0.99;
  double alpha_pi = 250.0;
  double alpha_d = 20.0;
  double alpha_r = 20.0;
  double tau = 0.01;
  int batch = 128;
  double lr_policy = 0.003;
  double lr_emb = 0.0003;
  double lr_q = 0.03;
  double lr_v = 0.03;
  std::size_t replay_capacity = 3000000;
  int warmup_transitions = 1000;  // random-action transitions per cell
  LatentMode latent_mode = LatentMode::kDse;
  LatentCadence cadence = LatentCadence::kPerStep;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  uint64_t run_seed = 0;
  int metrics_every = 100;
  std::vector<int> critic_hidden = {100};
};

/// One replay state together with every noise/latent realization a loss
/// needs, fixed by the caller so losses are deterministic functions of the
/// parameters (which is what the finite-difference checks require).
/// Conventions per loss:
///  - policy loss: z, g hold latent VALUES; act_noise reparameterizes a.
///  - embedding loss (taped_is_z): z holds NOISE for the taped latent, g
///    holds the other latent's VALUES (and vice versa when !taped_is_z).
struct SacSample {
  std::vector<double> s;
  std::vector<double> z;
  std::vector<double> g;
  std::vector<double> act_noise;
};

/// Plain critic evaluation, Q(s, a) (or V(s) with a empty).
double critic_value(const MlpSpec& spec, const ParamVector& params,
                    std::span<const double> s, std::span<const double> a,
                    MlpScratch& scratch);

/// Detached TD targets r + gamma * Vbar(s'), with the bootstrap dropped at
/// true terminal ends (time-limit truncation still bootstraps).
std::vector<double> q_targets(const MlpSpec& v_spec, const ParamVector& v_target,
                              std::span<const Transition* const> batch,
                              double gamma);

/// Mean squared error of a taped critic against detached targets. For the
/// Q twins, inputs are (s, a); for V, pass states only.
Var critic_mse_loss(Tape& tape, const MlpSpec& spec, const BoundParams& params,
                    std::span<const Transition* const> batch, bool with_action,
                    std::span<const double> targets);

/// Single-sample state-value target:
///   Qmin(s,a) - (1/alpha_pi) log pi(a|s,z,g)
///   - (1/alpha_d) log(q_d(z)/p(z)) - (1/alpha_r) log(q_w(g)/p(g))
/// with z ~ q_d(row_d), g ~ q_w(row_w), a ~ pi, all drawn from `rng`.
/// Null embedding pointers drop the corresponding latent and ratio term.
double sac_v_target(const Policy& policy, const MlpSpec& q_spec,
                    const ParamVector& q1, const ParamVector& q2,
                    const VariationalEmbedding* qd, int row_d,
                    const VariationalEmbedding* qw, int row_w,
                    std::span<const double> s, std::mt19937_64& rng,
                    double alpha_pi, double alpha_d, double alpha_r,
                    MlpScratch& scratch);

/// Policy loss for one cell: mean_b [(1/alpha_pi) log pi(a_b|s_b,z_b,g_b)
/// - Qmin(s_b, a_b)] with a_b reparameterized through theta and the critics
/// held constant (gradient flows through a into Q).
Var sac_policy_loss(Tape& tape, const Policy& policy, const BoundParams& theta,
                    const MlpSpec& q_spec, const ParamVector& q1,
                    const ParamVector& q2, std::span<const SacSample> samples,
                    double alpha_pi);

/// Variational-row loss for one cell:
///   mean_b [ log(q(latent_b)/p(latent_b)) - alpha_weight * kappa_b ],
///   kappa_b = Qmin(s_b, a_b) - (1/alpha_pi) log pi(a_b|s_b,z_b,g_b),
/// with the row's latent reparameterized (taped through the policy and Q)
/// and theta/critics held constant. taped_is_z selects which policy slot
/// the taped latent feeds.
Var sac_embedding_loss(Tape& tape, const VariationalEmbedding& emb,
                       const BoundParams& bound, int row, bool taped_is_z,
                       const Policy& policy, const MlpSpec& q_spec,
                       const ParamVector& q1, const ParamVector& q2,
                       std::span<const SacSample> samples, double alpha_weight,
                       double alpha_pi);

/// target <- tau * src + (1 - tau) * target, elementwise.
void soft_update(ParamVector& target, const ParamVector& src, double tau);

/// Per-cell runtime: environment (persistent mid-episode across iterations),
/// replay memory, twin Q + V + target-V parameters and their optimizers.
struct SacCell {
  int i = 0;
  int j = 0;
  std::unique_ptr<Env> env;
  ReplayMemory replay;
  ParamVector q1, q2, v, v_target;
  Optimizer opt_q1, opt_q2, opt_v;

  bool episode_active = false;
  double ep_return = 0.0;
  std::int64_t episodes = 0;          // completed
  std::int64_t episodes_started = 0;
  double window_sum = 0.0;            // returns since the last metrics row
  std::int64_t window_n = 0;
  double last_return = 0.0;
  std::mt19937_64 rng_action, rng_latent;

  double loss_q = 0.0, loss_v = 0.0;  // latest values, for metrics
  std::vector<double> cur_z, cur_g;   // latents driving the current episode

  SacCell(int i_, int j_, std::unique_ptr<Env> env_, std::size_t capacity)
      : i(i_), j(j_), env(std::move(env_)), replay(capacity) {}
};

/// Off-policy multi-task trainer. Each iteration advances every cell's
/// environment by one step, then (once the replays are warm) takes one
/// gradient step per cell on the twin critics, the value net, and the
/// matching embedding rows, one averaged step on the shared policy, and a
/// soft target update for every cell.
class SacTrainer {
 public:
  SacTrainer(SacSettings cfg, std::vector<TrainerCell> cells, int grid_rows,
             int grid_cols, Policy policy, int z_dim, int g_dim);

  std::vector<MetricsRow> iterate();

  /// Current latent means for a cell (z then g; empty in latent-free mode).
  std::vector<double> latent_mean_z(int i) const;
  std::vector<double> latent_mean_g(int j) const;

  SacSettings cfg;
  std::vector<SacCell> cells;
  int grid_rows = 0;
  int grid_cols = 0;
  Policy policy;
  VariationalEmbedding qd, qw;
  Optimizer opt_theta, opt_qd, opt_qw;
  MlpSpec q_spec, v_spec;
  std::int64_t iteration = 0;
  bool train_policy = true;
  bool train_embeddings = true;
  bool train_critics = true;

  int qd_row_for(const SacCell& c) const;
  void warmup();
  void env_step(SacCell& cell);
  double grad_phase();  // returns the iteration's policy-loss value

 private:
  Tape tape_;
  MlpScratch scratch_;
  bool warmed_up_ = false;
};

}  // namespace dse
