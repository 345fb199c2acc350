#include "dse/sac.hpp"

#include <algorithm>
#include <cmath>

#include "dse/errors.hpp"
#include "dse/heads.hpp"

namespace dse {
namespace {

std::vector<Var> leaf_all(Tape& tape, std::span<const double> vals) {
  std::vector<Var> out;
  out.reserve(vals.size());
  for (double v : vals) out.push_back(tape.leaf(v));
  return out;
}

Var taped_qmin(Tape& tape, const MlpSpec& q_spec, const ParamVector& q1,
               const ParamVector& q2, std::span<const double> s,
               std::span<const Var> action) {
  std::vector<Var> qin = leaf_all(tape, s);
  qin.insert(qin.end(), action.begin(), action.end());
  Var o1 = mlp_forward_const_params(q_spec, tape, q1, qin)[0];
  Var o2 = mlp_forward_const_params(q_spec, tape, q2, qin)[0];
  // min by value; the gradient follows the selected branch.
  return tape.val(o1) <= tape.val(o2) ? o1 : o2;
}

}  // namespace

double critic_value(const MlpSpec& spec, const ParamVector& params,
                    std::span<const double> s, std::span<const double> a,
                    MlpScratch& scratch) {
  std::vector<double> input;
  input.reserve(s.size() + a.size());
  input.insert(input.end(), s.begin(), s.end());
  input.insert(input.end(), a.begin(), a.end());
  return scratch.forward(spec, params, input)[0];
}

std::vector<double> q_targets(const MlpSpec& v_spec, const ParamVector& v_target,
                              std::span<const Transition* const> batch,
                              double gamma) {
  MlpScratch scratch;
  std::vector<double> out;
  out.reserve(batch.size());
  for (const Transition* t : batch) {
    double y = t->reward;
    const bool terminal = t->done && !t->truncated;
    if (!terminal) y += gamma * scratch.forward(v_spec, v_target, t->s_next)[0];
    out.push_back(y);
  }
  return out;
}

Var critic_mse_loss(Tape& tape, const MlpSpec& spec, const BoundParams& params,
                    std::span<const Transition* const> batch, bool with_action,
                    std::span<const double> targets) {
  if (batch.empty()) throw std::invalid_argument("critic loss: empty batch");
  std::vector<Var> terms;
  terms.reserve(batch.size());
  std::vector<Var> input;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    input.clear();
    for (double v : batch[b]->s) input.push_back(tape.leaf(v));
    if (with_action)
      for (double v : batch[b]->a) input.push_back(tape.leaf(v));
    Var out = mlp_forward_taped(spec, tape, params, input)[0];
    terms.push_back(tape.square(tape.add_const(out, -targets[b])));
  }
  std::vector<double> coeffs(terms.size(), 1.0 / static_cast<double>(terms.size()));
  return tape.weighted_sum(terms, coeffs);
}

double sac_v_target(const Policy& policy, const MlpSpec& q_spec,
                    const ParamVector& q1, const ParamVector& q2,
                    const VariationalEmbedding* qd, int row_d,
                    const VariationalEmbedding* qw, int row_w,
                    std::span<const double> s, std::mt19937_64& rng,
                    double alpha_pi, double alpha_d, double alpha_r,
                    MlpScratch& scratch) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z, g;
  double ratio_z = 0.0, ratio_g = 0.0;
  if (qd != nullptr) {
    std::vector<double> noise(qd->latent_dim);
    for (double& n : noise) n = normal(rng);
    z = qd->sample(row_d, noise);
    ratio_z = qd->log_density_ratio(row_d, z);
  }
  if (qw != nullptr) {
    std::vector<double> noise(qw->latent_dim);
    for (double& n : noise) n = normal(rng);
    g = qw->sample(row_w, noise);
    ratio_g = qw->log_density_ratio(row_w, g);
  }
  std::vector<double> input;
  build_policy_input(policy, s, z, g, input);
  auto out = scratch.forward(policy.mlp, policy.params, input);
  const int adim = policy.act_dim;
  std::vector<double> act_noise(adim);
  for (double& n : act_noise) n = normal(rng);
  auto ga = gaussian_tanh_head(out.subspan(0, adim), out.subspan(adim, adim),
                               act_noise);
  MlpScratch qs;
  const double qmin =
      std::min(critic_value(q_spec, q1, s, ga.action, qs),
               critic_value(q_spec, q2, s, ga.action, qs));
  return qmin - ga.log_prob / alpha_pi - ratio_z / alpha_d - ratio_g / alpha_r;
}

Var sac_policy_loss(Tape& tape, const Policy& policy, const BoundParams& theta,
                    const MlpSpec& q_spec, const ParamVector& q1,
                    const ParamVector& q2, std::span<const SacSample> samples,
                    double alpha_pi) {
  if (samples.empty()) throw std::invalid_argument("policy loss: empty batch");
  const int adim = policy.act_dim;
  std::vector<Var> terms;
  terms.reserve(samples.size());
  std::vector<double> input_vals;
  for (const SacSample& smp : samples) {
    build_policy_input(policy, smp.s, smp.z, smp.g, input_vals);
    std::vector<Var> input = leaf_all(tape, input_vals);
    auto out = mlp_forward_taped(policy.mlp, tape, theta, input);
    auto ga = gaussian_tanh_head_taped(
        tape, std::span<const Var>(out.data(), adim),
        std::span<const Var>(out.data() + adim, adim), smp.act_noise);
    Var qmin = taped_qmin(tape, q_spec, q1, q2, smp.s, ga.action);
    terms.push_back(
        tape.sub(tape.mul_const(ga.log_prob, 1.0 / alpha_pi), qmin));
  }
  std::vector<double> coeffs(terms.size(), 1.0 / static_cast<double>(terms.size()));
  return tape.weighted_sum(terms, coeffs);
}

Var sac_embedding_loss(Tape& tape, const VariationalEmbedding& emb,
                       const BoundParams& bound, int row, bool taped_is_z,
                       const Policy& policy, const MlpSpec& q_spec,
                       const ParamVector& q1, const ParamVector& q2,
                       std::span<const SacSample> samples, double alpha_weight,
                       double alpha_pi) {
  if (samples.empty()) throw std::invalid_argument("embedding loss: empty batch");
  const int adim = policy.act_dim;
  std::vector<Var> terms;
  terms.reserve(samples.size());
  for (const SacSample& smp : samples) {
    std::span<const double> noise = taped_is_z ? smp.z : smp.g;
    std::span<const double> other = taped_is_z ? smp.g : smp.z;
    std::vector<Var> lat = emb.sample_taped(tape, bound, row, noise);
    std::vector<Var> other_vars = leaf_all(tape, other);
    std::span<const Var> z_slot = taped_is_z ? lat : other_vars;
    std::span<const Var> g_slot = taped_is_z ? other_vars : lat;
    auto input = build_policy_input_taped(policy, tape, smp.s, z_slot, g_slot);
    auto out = mlp_forward_const_params(policy.mlp, tape, policy.params, input);
    auto ga = gaussian_tanh_head_taped(
        tape, std::span<const Var>(out.data(), adim),
        std::span<const Var>(out.data() + adim, adim), smp.act_noise);
    Var qmin = taped_qmin(tape, q_spec, q1, q2, smp.s, ga.action);
    Var kappa = tape.sub(qmin, tape.mul_const(ga.log_prob, 1.0 / alpha_pi));
    Var ldr = emb.log_density_ratio_taped(tape, bound, row,
                                          std::span<const Var>(lat));
    terms.push_back(tape.sub(ldr, tape.mul_const(kappa, alpha_weight)));
  }
  std::vector<double> coeffs(terms.size(), 1.0 / static_cast<double>(terms.size()));
  return tape.weighted_sum(terms, coeffs);
}

void soft_update(ParamVector& target, const ParamVector& src, double tau) {
  if (target.size() != src.size())
    throw std::invalid_argument("soft update: size mismatch");
  for (std::size_t k = 0; k < target.values.size(); ++k)
    target.values[k] = tau * src.values[k] + (1.0 - tau) * target.values[k];
}

SacTrainer::SacTrainer(SacSettings cfg_in, std::vector<TrainerCell> cells_in,
                       int grid_rows_in, int grid_cols_in, Policy policy_in,
                       int z_dim, int g_dim)
    : cfg(cfg_in),
      grid_rows(grid_rows_in),
      grid_cols(grid_cols_in),
      policy(std::move(policy_in)) {
  if (cells_in.empty()) throw ConfigError("trainer needs at least one task cell");
  if (policy.discrete)
    throw ConfigError("the off-policy trainer requires continuous actions");
  for (auto& c : cells_in) {
    if (c.env == nullptr) throw ConfigError("task cell has no environment");
    if (c.env->discrete_actions())
      throw ConfigError("the off-policy trainer requires continuous actions");
    if (c.i < 0 || c.i >= grid_rows || c.j < 0 || c.j >= grid_cols)
      throw ConfigError("task cell outside the grid");
    cells.emplace_back(c.i, c.j, std::move(c.env), cfg.replay_capacity);
  }
  switch (cfg.latent_mode) {
    case LatentMode::kDse: {
      if (policy.z_dim != z_dim || policy.g_dim != g_dim)
        throw ConfigError("policy latent dims do not match the embedding dims");
      auto r1 = make_stream(cfg.run_seed, 0, 0, 1, RngPurpose::kInit);
      qd.init(grid_rows, z_dim, r1);
      auto r2 = make_stream(cfg.run_seed, 0, 0, 2, RngPurpose::kInit);
      qw.init(grid_cols, g_dim, r2);
      break;
    }
    case LatentMode::kSingle: {
      if (policy.z_dim != z_dim + g_dim || policy.g_dim != 0)
        throw ConfigError(
            "single-latent policies need z_dim = dim z + dim g and g_dim = 0");
      auto r1 = make_stream(cfg.run_seed, 0, 0, 1, RngPurpose::kInit);
      qd.init(grid_rows * grid_cols, z_dim + g_dim, r1);
      break;
    }
    case LatentMode::kNone:
      if (policy.z_dim != 0 || policy.g_dim != 0)
        throw ConfigError("latent-free policies take no latent dims");
      break;
  }

  const int s_dim = policy.s_dim;
  const int a_dim = policy.act_dim;
  q_spec.input_dim = s_dim + a_dim;
  v_spec.input_dim = s_dim;
  for (int w : cfg.critic_hidden) {
    q_spec.hidden.push_back({w, Activation::kTanh});
    v_spec.hidden.push_back({w, Activation::kTanh});
  }
  q_spec.output_dim = 1;
  v_spec.output_dim = 1;

  for (SacCell& cell : cells) {
    auto ri = static_cast<uint64_t>(cell.i);
    auto rj = static_cast<uint64_t>(cell.j);
    auto r1 = make_stream(cfg.run_seed, ri, rj, 10, RngPurpose::kInit);
    init_mlp_params(q_spec, cell.q1, r1);
    auto r2 = make_stream(cfg.run_seed, ri, rj, 11, RngPurpose::kInit);
    init_mlp_params(q_spec, cell.q2, r2);
    auto r3 = make_stream(cfg.run_seed, ri, rj, 12, RngPurpose::kInit);
    init_mlp_params(v_spec, cell.v, r3);
    cell.v_target = cell.v;
    cell.opt_q1 = Optimizer{cfg.optimizer, cfg.lr_q};
    cell.opt_q2 = Optimizer{cfg.optimizer, cfg.lr_q};
    cell.opt_v = Optimizer{cfg.optimizer, cfg.lr_v};
  }
  opt_theta = Optimizer{cfg.optimizer, cfg.lr_policy};
  opt_qd = Optimizer{cfg.optimizer, cfg.lr_emb};
  opt_qw = Optimizer{cfg.optimizer, cfg.lr_emb};
}

int SacTrainer::qd_row_for(const SacCell& c) const {
  return cfg.latent_mode == LatentMode::kSingle ? c.i * grid_cols + c.j : c.i;
}

std::vector<double> SacTrainer::latent_mean_z(int i) const {
  if (cfg.latent_mode == LatentMode::kNone) return {};
  auto m = qd.mean(i);
  return {m.begin(), m.end()};
}

std::vector<double> SacTrainer::latent_mean_g(int j) const {
  if (cfg.latent_mode != LatentMode::kDse) return {};
  auto m = qw.mean(j);
  return {m.begin(), m.end()};
}

void SacTrainer::warmup() {
  for (SacCell& cell : cells) {
    const auto i = static_cast<uint64_t>(cell.i);
    const auto j = static_cast<uint64_t>(cell.j);
    uint64_t ep = 0;
    const int adim = cell.env->action_dim();
    while (cell.replay.size() < static_cast<std::size_t>(cfg.warmup_transitions)) {
      cell.env->reset(stream_seed(cfg.run_seed, i, j, ep, RngPurpose::kWarmup));
      auto rng = make_stream(cfg.run_seed, i, j, ep, RngPurpose::kWarmup);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      bool done = false;
      std::vector<double> s(cell.env->obs_dim());
      std::vector<double> a(adim);
      while (!done &&
             cell.replay.size() < static_cast<std::size_t>(cfg.warmup_transitions)) {
        cell.env->observe(s);
        for (double& v : a) v = u(rng);
        StepResult sr = cell.env->step(std::span<const double>(a));
        Transition t;
        t.s = s;
        t.a = a;
        t.reward = sr.reward;
        t.s_next = cell.env->observation();
        t.done = sr.done;
        t.truncated = sr.truncated;
        cell.replay.push(std::move(t));
        done = sr.done;
      }
      ++ep;
    }
  }
  warmed_up_ = true;
}

void SacTrainer::env_step(SacCell& cell) {
  Env& env = *cell.env;
  const auto i = static_cast<uint64_t>(cell.i);
  const auto j = static_cast<uint64_t>(cell.j);
  const bool has_z = cfg.latent_mode != LatentMode::kNone;
  const bool has_g = cfg.latent_mode == LatentMode::kDse;

  if (!cell.episode_active) {
    const auto ep = static_cast<uint64_t>(cell.episodes_started++);
    env.reset(stream_seed(cfg.run_seed, i, j, ep, RngPurpose::kEnvReset));
    cell.rng_action = make_stream(cfg.run_seed, i, j, ep, RngPurpose::kAction);
    cell.rng_latent = make_stream(cfg.run_seed, i, j, ep, RngPurpose::kLatent);
    cell.episode_active = true;
    cell.ep_return = 0.0;
    if (cfg.cadence == LatentCadence::kPerEpisode) {
      std::normal_distribution<double> normal(0.0, 1.0);
      if (has_z) {
        std::vector<double> noise(qd.latent_dim);
        for (double& n : noise) n = normal(cell.rng_latent);
        cell.cur_z = qd.sample(qd_row_for(cell), noise);
      }
      if (has_g) {
        std::vector<double> noise(qw.latent_dim);
        for (double& n : noise) n = normal(cell.rng_latent);
        cell.cur_g = qw.sample(cell.j, noise);
      }
    }
  }
  if (cfg.cadence == LatentCadence::kPerStep) {
    std::normal_distribution<double> normal(0.0, 1.0);
    if (has_z) {
      std::vector<double> noise(qd.latent_dim);
      for (double& n : noise) n = normal(cell.rng_latent);
      cell.cur_z = qd.sample(qd_row_for(cell), noise);
    }
    if (has_g) {
      std::vector<double> noise(qw.latent_dim);
      for (double& n : noise) n = normal(cell.rng_latent);
      cell.cur_g = qw.sample(cell.j, noise);
    }
  }

  Transition t;
  t.s = env.observation();
  std::vector<double> input;
  build_policy_input(policy, t.s, cell.cur_z, cell.cur_g, input);
  auto out = scratch_.forward(policy.mlp, policy.params, input);
  const int adim = policy.act_dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> act_noise(adim);
  for (double& n : act_noise) n = normal(cell.rng_action);
  auto ga = gaussian_tanh_head(out.subspan(0, adim), out.subspan(adim, adim),
                               act_noise);
  StepResult sr = env.step(std::span<const double>(ga.action));
  t.a = ga.action;
  t.reward = sr.reward;
  t.s_next = env.observation();
  t.done = sr.done;
  t.truncated = sr.truncated;
  cell.replay.push(std::move(t));
  cell.ep_return += sr.reward;
  if (sr.done) {
    cell.episode_active = false;
    cell.episodes += 1;
    cell.window_sum += cell.ep_return;
    cell.window_n += 1;
    cell.last_return = cell.ep_return;
  }
}

double SacTrainer::grad_phase() {
  const std::size_t n_cells = cells.size();
  const auto batch = static_cast<std::size_t>(cfg.batch);
  for (const SacCell& c : cells)
    if (c.replay.size() < batch) return 0.0;

  const bool has_z = cfg.latent_mode != LatentMode::kNone;
  const bool has_g = cfg.latent_mode == LatentMode::kDse;
  double loss_pi_total = 0.0;
  policy.params.zero_grads();
  qd.params.zero_grads();
  qw.params.zero_grads();

  for (SacCell& cell : cells) {
    const auto i = static_cast<uint64_t>(cell.i);
    const auto j = static_cast<uint64_t>(cell.j);
    const auto it = static_cast<uint64_t>(iteration);
    auto rng_replay = make_stream(cfg.run_seed, i, j, it, RngPurpose::kReplay);
    auto idx = cell.replay.sample_indices(batch, rng_replay);
    std::vector<const Transition*> ptrs;
    ptrs.reserve(batch);
    for (std::size_t k : idx) ptrs.push_back(&cell.replay.at(k));

    auto rng_grad = make_stream(cfg.run_seed, i, j, it, RngPurpose::kLatent);
    const int row_d = has_z ? qd_row_for(cell) : 0;

    // Value targets with the pre-update critics.
    std::vector<double> v_hat;
    v_hat.reserve(batch);
    for (const Transition* t : ptrs) {
      v_hat.push_back(sac_v_target(policy, q_spec, cell.q1, cell.q2,
                                   has_z ? &qd : nullptr, row_d,
                                   has_g ? &qw : nullptr, cell.j, t->s, rng_grad,
                                   cfg.alpha_pi, cfg.alpha_d, cfg.alpha_r,
                                   scratch_));
    }

    if (train_critics) {
      auto y = q_targets(v_spec, cell.v_target, ptrs, cfg.gamma);
      tape_.clear();
      BoundParams bq1 = bind(tape_, cell.q1);
      Var lq1 = critic_mse_loss(tape_, q_spec, bq1, ptrs, true, y);
      tape_.backward(lq1);
      harvest_grads(tape_, bq1, cell.q1);
      cell.opt_q1.step(cell.q1);

      tape_.clear();
      BoundParams bq2 = bind(tape_, cell.q2);
      Var lq2 = critic_mse_loss(tape_, q_spec, bq2, ptrs, true, y);
      tape_.backward(lq2);
      harvest_grads(tape_, bq2, cell.q2);
      cell.opt_q2.step(cell.q2);
      cell.loss_q = 0.5 * (tape_.val(lq1) + tape_.val(lq2));

      tape_.clear();
      BoundParams bv = bind(tape_, cell.v);
      Var lv = critic_mse_loss(tape_, v_spec, bv, ptrs, false, v_hat);
      tape_.backward(lv);
      harvest_grads(tape_, bv, cell.v);
      cell.opt_v.step(cell.v);
      cell.loss_v = tape_.val(lv);
    }

    // Shared-policy loss samples: fixed latent values, reparameterized action.
    std::normal_distribution<double> normal(0.0, 1.0);
    const int adim = policy.act_dim;
    std::vector<SacSample> samples(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      SacSample& smp = samples[b];
      smp.s = ptrs[b]->s;
      if (has_z) {
        std::vector<double> noise(qd.latent_dim);
        for (double& n : noise) n = normal(rng_grad);
        smp.z = qd.sample(row_d, noise);
      }
      if (has_g) {
        std::vector<double> noise(qw.latent_dim);
        for (double& n : noise) n = normal(rng_grad);
        smp.g = qw.sample(cell.j, noise);
      }
      smp.act_noise.resize(adim);
      for (double& n : smp.act_noise) n = normal(rng_grad);
    }
    if (train_policy) {
      tape_.clear();
      BoundParams theta = bind(tape_, policy.params);
      Var lpi = sac_policy_loss(tape_, policy, theta, q_spec, cell.q1, cell.q2,
                                samples, cfg.alpha_pi);
      tape_.backward(lpi);
      harvest_grads(tape_, theta, policy.params,
                    1.0 / static_cast<double>(n_cells));
      loss_pi_total += tape_.val(lpi) / static_cast<double>(n_cells);
    }

    if (train_embeddings && has_z) {
      // Row loss for the dynamics latent: z reparameterized, g fixed.
      for (std::size_t b = 0; b < batch; ++b) {
        SacSample& smp = samples[b];
        smp.z.resize(qd.latent_dim);
        for (double& n : smp.z) n = normal(rng_grad);  // noise, not values
        if (has_g) {
          std::vector<double> noise(qw.latent_dim);
          for (double& n : noise) n = normal(rng_grad);
          smp.g = qw.sample(cell.j, noise);
        }
        for (double& n : smp.act_noise) n = normal(rng_grad);
      }
      tape_.clear();
      BoundParams bd = bind(tape_, qd.params);
      Var ld = sac_embedding_loss(tape_, qd, bd, row_d, true, policy, q_spec,
                                  cell.q1, cell.q2, samples, cfg.alpha_d,
                                  cfg.alpha_pi);
      tape_.backward(ld);
      harvest_grads(tape_, bd, qd.params, 1.0 / static_cast<double>(n_cells));

      if (has_g) {
        for (std::size_t b = 0; b < batch; ++b) {
          SacSample& smp = samples[b];
          std::vector<double> noise(qd.latent_dim);
          for (double& n : noise) n = normal(rng_grad);
          smp.z = qd.sample(row_d, noise);
          smp.g.resize(qw.latent_dim);
          for (double& n : smp.g) n = normal(rng_grad);  // noise for the g row
          for (double& n : smp.act_noise) n = normal(rng_grad);
        }
        tape_.clear();
        BoundParams bw = bind(tape_, qw.params);
        Var lw = sac_embedding_loss(tape_, qw, bw, cell.j, false, policy, q_spec,
                                    cell.q1, cell.q2, samples, cfg.alpha_r,
                                    cfg.alpha_pi);
        tape_.backward(lw);
        harvest_grads(tape_, bw, qw.params, 1.0 / static_cast<double>(n_cells));
      }
    }
  }

  if (train_embeddings && cfg.latent_mode != LatentMode::kNone) {
    opt_qd.step(qd.params);
    if (cfg.latent_mode == LatentMode::kDse) opt_qw.step(qw.params);
  }
  if (train_policy) opt_theta.step(policy.params);
  if (!std::isfinite(loss_pi_total))
    throw TrainingDiverged("non-finite policy loss");
  return loss_pi_total;
}

std::vector<MetricsRow> SacTrainer::iterate() {
  if (!warmed_up_ && cfg.warmup_transitions > 0) warmup();
  for (SacCell& cell : cells) env_step(cell);
  const double loss_pi = grad_phase();
  for (SacCell& cell : cells) soft_update(cell.v_target, cell.v, cfg.tau);
  ++iteration;

  std::vector<MetricsRow> rows;
  if (iteration % cfg.metrics_every == 0) {
    rows.reserve(cells.size());
    for (SacCell& cell : cells) {
      MetricsRow r;
      r.iteration = iteration;
      r.i = cell.i;
      r.j = cell.j;
      r.episodes = cell.episodes;
      r.mean_return = cell.window_n > 0
                          ? cell.window_sum / static_cast<double>(cell.window_n)
                          : cell.last_return;
      r.loss = loss_pi;
      r.loss_q = cell.loss_q;
      r.loss_v = cell.loss_v;
      if (cfg.latent_mode == LatentMode::kDse) {
        r.kl_z = qd.kl_to_prior(cell.i);
        r.kl_g = qw.kl_to_prior(cell.j);
      } else if (cfg.latent_mode == LatentMode::kSingle) {
        r.kl_z = qd.kl_to_prior(qd_row_for(cell));
      }
      cell.window_sum = 0.0;
      cell.window_n = 0;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace dse
