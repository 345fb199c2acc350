#include "dse/reinforce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "dse/errors.hpp"
#include "dse/heads.hpp"

namespace dse {

LatentMode parse_latent_mode(const std::string& name) {
  if (name == "dse") return LatentMode::kDse;
  if (name == "single") return LatentMode::kSingle;
  if (name == "none") return LatentMode::kNone;
  throw ConfigError("unknown latent mode: " + name);
}

std::string latent_mode_name(LatentMode m) {
  switch (m) {
    case LatentMode::kDse: return "dse";
    case LatentMode::kSingle: return "single";
    case LatentMode::kNone: return "none";
  }
  throw ConfigError("bad latent mode value");
}

LatentCadence parse_latent_cadence(const std::string& name) {
  if (name == "per-step") return LatentCadence::kPerStep;
  if (name == "per-episode") return LatentCadence::kPerEpisode;
  throw ConfigError("unknown latent cadence: " + name);
}

std::string latent_cadence_name(LatentCadence c) {
  return c == LatentCadence::kPerStep ? "per-step" : "per-episode";
}

HCutoffMode parse_h_cutoff_mode(const std::string& name) {
  if (name == "truncated-only") return HCutoffMode::kTruncatedOnly;
  if (name == "all") return HCutoffMode::kAll;
  if (name == "off") return HCutoffMode::kOff;
  throw ConfigError("unknown horizon cutoff mode: " + name);
}

std::string h_cutoff_mode_name(HCutoffMode m) {
  switch (m) {
    case HCutoffMode::kTruncatedOnly: return "truncated-only";
    case HCutoffMode::kAll: return "all";
    case HCutoffMode::kOff: return "off";
  }
  throw ConfigError("bad horizon cutoff mode value");
}

std::vector<double> regularized_returns(std::span<const double> rewards,
                                        std::span<const double> log_probs,
                                        double gamma, double alpha_pi) {
  const double inv = std::isinf(alpha_pi) ? 0.0 : 1.0 / alpha_pi;
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = (rewards[t] - inv * log_probs[t]) + gamma * acc;
    out[t] = acc;
  }
  return out;
}

double geometric_kl_weight(double gamma, int max_episode_length) {
  return (1.0 - std::pow(gamma, max_episode_length - 1)) / (1.0 - gamma);
}

Var trajectory_score_loss(Tape& tape, const Policy& policy,
                          const BoundParams& theta, const LatentRefs& refs,
                          const Trajectory& traj, std::span<const double> coeffs,
                          LatentCadence cadence) {
  if (coeffs.empty()) throw std::invalid_argument("score loss: empty coefficients");
  if (coeffs.size() > traj.length())
    throw std::invalid_argument("score loss: more coefficients than steps");
  const int adim = policy.act_dim;
  std::vector<Var> terms;
  terms.reserve(coeffs.size());
  std::vector<Var> z_vars, g_vars;
  for (std::size_t t = 0; t < coeffs.size(); ++t) {
    const bool fresh = t == 0 || cadence == LatentCadence::kPerStep;
    const std::size_t noise_t = cadence == LatentCadence::kPerStep ? t : 0;
    if (refs.qd != nullptr && fresh)
      z_vars = refs.qd->sample_taped(tape, refs.bd, refs.qd_row, traj.z_noise[noise_t]);
    if (refs.qw != nullptr && fresh)
      g_vars = refs.qw->sample_taped(tape, refs.bw, refs.qw_row, traj.g_noise[noise_t]);
    auto input = build_policy_input_taped(policy, tape, traj.states[t], z_vars, g_vars);
    auto out = mlp_forward_taped(policy.mlp, tape, theta, input);
    Var lp;
    if (policy.discrete) {
      lp = categorical_log_prob_taped(tape, out, traj.actions_d[t]);
    } else {
      lp = gaussian_tanh_log_prob_taped(
          tape, std::span<const Var>(out.data(), adim),
          std::span<const Var>(out.data() + adim, adim), traj.actions_c[t]);
    }
    terms.push_back(lp);
  }
  return tape.weighted_sum(terms, coeffs);
}

Var embedding_kl_penalty(Tape& tape, const VariationalEmbedding& emb,
                         const BoundParams& bound, std::span<const int> rows,
                         double weight) {
  if (rows.empty()) throw std::invalid_argument("kl penalty: empty row set");
  std::vector<Var> kls;
  kls.reserve(rows.size());
  for (int r : rows) kls.push_back(emb.kl_to_prior_taped(tape, bound, r));
  std::vector<double> coeffs(rows.size(), weight / static_cast<double>(rows.size()));
  return tape.weighted_sum(kls, coeffs);
}

Var reinforce_loss(Tape& tape, const Policy& policy, const BoundParams& theta,
                   const VariationalEmbedding* qd, const BoundParams& bd,
                   const VariationalEmbedding* qw, const BoundParams& bw,
                   std::span<const Trajectory> batch,
                   std::span<const std::vector<double>> coeffs_per_traj,
                   std::span<const int> qd_rows, std::span<const int> qw_rows,
                   const ReinforceSettings& cfg, int max_episode_length,
                   LatentCadence cadence) {
  if (batch.empty()) throw std::invalid_argument("reinforce loss: empty batch");
  const double scale = -1.0 / static_cast<double>(batch.size());
  std::vector<Var> parts;
  std::vector<double> weights;
  std::vector<double> scaled;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (coeffs_per_traj[k].empty()) continue;
    LatentRefs refs;
    if (qd != nullptr) {
      refs.qd = qd;
      refs.bd = bd;
      refs.qd_row = batch[k].i;  // kSingle callers pre-map rows into i
    }
    if (qw != nullptr) {
      refs.qw = qw;
      refs.bw = bw;
      refs.qw_row = batch[k].j;
    }
    scaled.assign(coeffs_per_traj[k].begin(), coeffs_per_traj[k].end());
    for (double& c : scaled) c *= scale;
    parts.push_back(
        trajectory_score_loss(tape, policy, theta, refs, batch[k], scaled, cadence));
    weights.push_back(1.0);
  }
  const double c_weight = geometric_kl_weight(cfg.gamma, max_episode_length);
  if (qd != nullptr && !qd_rows.empty()) {
    parts.push_back(
        embedding_kl_penalty(tape, *qd, bd, qd_rows, c_weight / cfg.alpha_d));
    weights.push_back(1.0);
  }
  if (qw != nullptr && !qw_rows.empty()) {
    parts.push_back(
        embedding_kl_penalty(tape, *qw, bw, qw_rows, c_weight / cfg.alpha_r));
    weights.push_back(1.0);
  }
  if (parts.empty()) return tape.leaf(0.0);
  return tape.weighted_sum(parts, weights);
}

ReinforceTrainer::ReinforceTrainer(ReinforceSettings cfg_in,
                                   std::vector<TrainerCell> cells_in,
                                   int grid_rows_in, int grid_cols_in,
                                   Policy policy_in, int z_dim, int g_dim)
    : cfg(cfg_in),
      cells(std::move(cells_in)),
      grid_rows(grid_rows_in),
      grid_cols(grid_cols_in),
      policy(std::move(policy_in)) {
  if (cells.empty()) throw ConfigError("trainer needs at least one task cell");
  for (const auto& c : cells) {
    if (c.i < 0 || c.i >= grid_rows || c.j < 0 || c.j >= grid_cols)
      throw ConfigError("task cell outside the grid");
    if (c.env == nullptr) throw ConfigError("task cell has no environment");
    if (c.env->discrete_actions() != policy.discrete)
      throw ConfigError("policy/environment action kind mismatch");
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
  opt_theta = Optimizer{cfg.optimizer, cfg.lr};
  opt_qd = Optimizer{cfg.optimizer, cfg.lr_emb};
  opt_qw = Optimizer{cfg.optimizer, cfg.lr_emb};
  popart.resize(cells.size());
  for (auto& p : popart) p.beta = cfg.beta_art;
  episode_count.assign(cells.size(), 0);
  last_mean_return_.assign(cells.size(), 0.0);

  // KL expectation sets: the distinct trained rows, uniform weights.
  if (cfg.latent_mode == LatentMode::kDse) {
    for (const auto& c : cells) {
      kl_set_qd_.push_back(c.i);
      kl_set_qw_.push_back(c.j);
    }
  } else if (cfg.latent_mode == LatentMode::kSingle) {
    for (const auto& c : cells) kl_set_qd_.push_back(qd_row_for(c));
  }
  auto uniq = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(kl_set_qd_);
  uniq(kl_set_qw_);
}

int ReinforceTrainer::qd_row_for(const TrainerCell& c) const {
  return cfg.latent_mode == LatentMode::kSingle ? c.i * grid_cols + c.j : c.i;
}

int ReinforceTrainer::h_cutoff_steps() const {
  if (cfg.h_cutoff > 0) return cfg.h_cutoff;
  return static_cast<int>(std::llround(1.0 / (1.0 - cfg.gamma)));
}

int ReinforceTrainer::max_episode_length() const {
  return cells.front().env->max_steps();
}

Trajectory ReinforceTrainer::collect_trajectory(int cell_idx, uint64_t episode_index,
                                                RngPurpose env_purpose,
                                                RngPurpose action_purpose,
                                                RngPurpose latent_purpose) {
  TrainerCell& cell = cells[cell_idx];
  Env& env = *cell.env;
  const uint64_t i = static_cast<uint64_t>(cell.i);
  const uint64_t j = static_cast<uint64_t>(cell.j);
  env.reset(stream_seed(cfg.run_seed, i, j, episode_index, env_purpose));
  auto rng_action = make_stream(cfg.run_seed, i, j, episode_index, action_purpose);
  auto rng_latent = make_stream(cfg.run_seed, i, j, episode_index, latent_purpose);
  std::normal_distribution<double> normal(0.0, 1.0);

  Trajectory traj;
  traj.i = cell.i;
  traj.j = cell.j;

  const bool has_z = cfg.latent_mode != LatentMode::kNone;
  const bool has_g = cfg.latent_mode == LatentMode::kDse;
  const int zdim = has_z ? qd.latent_dim : 0;
  const int gdim = has_g ? qw.latent_dim : 0;
  const int qd_row = has_z ? qd_row_for(cell) : 0;

  MlpScratch scratch;
  std::vector<double> obs(env.obs_dim());
  std::vector<double> z, g, input, noise_z(zdim), noise_g(gdim), act_noise;
  const int adim = policy.act_dim;
  if (!policy.discrete) act_noise.resize(adim);

  bool done = false;
  while (!done) {
    const std::size_t t = traj.rewards.size();
    const bool fresh = t == 0 || cfg.cadence == LatentCadence::kPerStep;
    if (fresh) {
      if (has_z) {
        for (double& n : noise_z) n = normal(rng_latent);
        traj.z_noise.push_back(noise_z);
        z = qd.sample(qd_row, noise_z);
      }
      if (has_g) {
        for (double& n : noise_g) n = normal(rng_latent);
        traj.g_noise.push_back(noise_g);
        g = qw.sample(cell.j, noise_g);
      }
    }
    env.observe(obs);
    traj.states.push_back(obs);
    build_policy_input(policy, obs, z, g, input);
    auto out = scratch.forward(policy.mlp, policy.params, input);
    StepResult sr;
    if (policy.discrete) {
      int a = sample_categorical(out, rng_action);
      traj.actions_d.push_back(a);
      traj.log_probs.push_back(categorical_log_prob(out, a));
      sr = env.step(a);
    } else {
      for (double& n : act_noise) n = normal(rng_action);
      auto s = gaussian_tanh_head(out.subspan(0, adim), out.subspan(adim, adim),
                                  act_noise);
      traj.actions_c.push_back(s.presquash);
      traj.log_probs.push_back(s.log_prob);
      sr = env.step(std::span<const double>(s.action));
    }
    traj.rewards.push_back(sr.reward);
    done = sr.done;
    if (done) traj.terminated = !sr.truncated;
  }
  return traj;
}

void ReinforceTrainer::accumulate_trajectory_grads(const Trajectory& traj,
                                                   std::span<const double> coeffs,
                                                   double* loss_value) {
  tape_.clear();
  BoundParams theta = bind(tape_, policy.params);
  LatentRefs refs;
  if (cfg.latent_mode != LatentMode::kNone) {
    refs.qd = &qd;
    refs.bd = bind(tape_, qd.params);
    refs.qd_row = cfg.latent_mode == LatentMode::kSingle
                      ? traj.i * grid_cols + traj.j
                      : traj.i;
  }
  if (cfg.latent_mode == LatentMode::kDse) {
    refs.qw = &qw;
    refs.bw = bind(tape_, qw.params);
    refs.qw_row = traj.j;
  }
  Var loss = trajectory_score_loss(tape_, policy, theta, refs, traj, coeffs,
                                   cfg.cadence);
  tape_.backward(loss);
  if (train_policy) harvest_grads(tape_, theta, policy.params);
  if (train_embeddings && refs.qd != nullptr)
    harvest_grads(tape_, refs.bd, qd.params);
  if (train_embeddings && refs.qw != nullptr)
    harvest_grads(tape_, refs.bw, qw.params);
  *loss_value += tape_.val(loss);
}

void ReinforceTrainer::accumulate_kl_grads(double* loss_value) {
  if (!train_embeddings || cfg.latent_mode == LatentMode::kNone) return;
  const double c_weight = geometric_kl_weight(cfg.gamma, max_episode_length());
  const std::vector<int>& rows_d = kl_rows_qd ? *kl_rows_qd : kl_set_qd_;
  tape_.clear();
  BoundParams bd = bind(tape_, qd.params);
  Var total = embedding_kl_penalty(tape_, qd, bd, rows_d, c_weight / cfg.alpha_d);
  BoundParams bw;
  if (cfg.latent_mode == LatentMode::kDse) {
    const std::vector<int>& rows_w = kl_rows_qw ? *kl_rows_qw : kl_set_qw_;
    bw = bind(tape_, qw.params);
    total = tape_.add(
        total, embedding_kl_penalty(tape_, qw, bw, rows_w, c_weight / cfg.alpha_r));
  }
  tape_.backward(total);
  harvest_grads(tape_, bd, qd.params);
  if (cfg.latent_mode == LatentMode::kDse) harvest_grads(tape_, bw, qw.params);
  *loss_value += tape_.val(total);
}

std::vector<MetricsRow> ReinforceTrainer::iterate() {
  const std::size_t n_cells = cells.size();
  const int m = cfg.batch_m;
  std::vector<std::vector<Trajectory>> batch(n_cells);

  auto collect_cell = [&](std::size_t c) {
    batch[c].reserve(m);
    for (int k = 0; k < m; ++k) {
      batch[c].push_back(collect_trajectory(
          static_cast<int>(c), static_cast<uint64_t>(episode_count[c]) + k));
    }
  };
  if (cfg.threads <= 1 || n_cells <= 1) {
    for (std::size_t c = 0; c < n_cells; ++c) collect_cell(c);
  } else {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n_cells);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < n_cells; c += workers) collect_cell(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t c = 0; c < n_cells; ++c) episode_count[c] += m;

  // Regularized returns, per-task standardization, horizon cutoff.
  const int h = h_cutoff_steps();
  const double scale = -1.0 / static_cast<double>(n_cells * m);
  int skipped = 0;
  double loss_value = 0.0;
  policy.params.zero_grads();
  qd.params.zero_grads();
  qw.params.zero_grads();

  std::vector<double> coeffs;
  for (std::size_t c = 0; c < n_cells; ++c) {
    double return_sum = 0.0;
    for (Trajectory& traj : batch[c]) {
      for (double r : traj.rewards) return_sum += r;
      auto rr = regularized_returns(traj.rewards, traj.log_probs, cfg.gamma,
                                    cfg.alpha_pi);
      if (cfg.popart) popart[c].update_and_normalize(rr);
      const int T = static_cast<int>(traj.length());
      int used = T;
      if (cfg.h_mode == HCutoffMode::kAll ||
          (cfg.h_mode == HCutoffMode::kTruncatedOnly && !traj.terminated)) {
        used = T - h;
      }
      if (used <= 0) {
        ++skipped;
        continue;
      }
      coeffs.assign(rr.begin(), rr.begin() + used);
      for (double& v : coeffs) v *= scale;
      accumulate_trajectory_grads(traj, coeffs, &loss_value);
    }
    last_mean_return_[c] = return_sum / m;
  }
  if (skipped > 0) {
    std::fprintf(stderr,
                 "warning: iteration %lld skipped %d trajectories shorter than "
                 "the horizon cutoff\n",
                 static_cast<long long>(iteration), skipped);
  }
  accumulate_kl_grads(&loss_value);
  if (!std::isfinite(loss_value))
    throw TrainingDiverged("non-finite training loss");

  if (train_embeddings && cfg.latent_mode != LatentMode::kNone) {
    opt_qd.step(qd.params);
    if (cfg.latent_mode == LatentMode::kDse) opt_qw.step(qw.params);
  }
  if (train_policy) opt_theta.step(policy.params);
  ++iteration;

  std::vector<MetricsRow> rows;
  if (iteration % cfg.metrics_every == 0) {
    rows.reserve(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
      MetricsRow r;
      r.iteration = iteration;
      r.i = cells[c].i;
      r.j = cells[c].j;
      r.episodes = episode_count[c];
      r.mean_return = last_mean_return_[c];
      r.loss = loss_value;
      if (cfg.latent_mode == LatentMode::kDse) {
        r.kl_z = qd.kl_to_prior(cells[c].i);
        r.kl_g = qw.kl_to_prior(cells[c].j);
      } else if (cfg.latent_mode == LatentMode::kSingle) {
        r.kl_z = qd.kl_to_prior(qd_row_for(cells[c]));
      }
      rows.push_back(r);
    }
  }
  return rows;
}

double ReinforceTrainer::evaluate_cell(int cell_idx, int episodes) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Trajectory traj =
        collect_trajectory(cell_idx, static_cast<uint64_t>(e), RngPurpose::kEval,
                           RngPurpose::kEval, RngPurpose::kEval);
    for (double r : traj.rewards) total += r;
  }
  return total / episodes;
}

Trajectory rollout_policy(Env& env, const Policy& policy,
                          std::span<const double> z, std::span<const double> g,
                          uint64_t env_seed, uint64_t action_seed, bool greedy) {
  env.reset(env_seed);
  std::mt19937_64 rng(action_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpScratch scratch;
  Trajectory traj;
  std::vector<double> obs(env.obs_dim()), input;
  std::vector<double> act_noise(policy.discrete ? 0 : policy.act_dim);
  const int adim = policy.act_dim;
  bool done = false;
  while (!done) {
    env.observe(obs);
    traj.states.push_back(obs);
    build_policy_input(policy, obs, z, g, input);
    auto out = scratch.forward(policy.mlp, policy.params, input);
    StepResult sr;
    if (policy.discrete) {
      int a;
      if (greedy) {
        a = static_cast<int>(std::max_element(out.begin(), out.end()) -
                             out.begin());
      } else {
        a = sample_categorical(out, rng);
      }
      traj.actions_d.push_back(a);
      traj.log_probs.push_back(categorical_log_prob(out, a));
      sr = env.step(a);
    } else {
      std::vector<double> action(adim);
      if (greedy) {
        for (int k = 0; k < adim; ++k) action[k] = std::tanh(out[k]);
        traj.actions_c.emplace_back(out.begin(), out.begin() + adim);
        traj.log_probs.push_back(0.0);
      } else {
        for (double& n : act_noise) n = normal(rng);
        auto s = gaussian_tanh_head(out.subspan(0, adim), out.subspan(adim, adim),
                                    act_noise);
        action = s.action;
        traj.actions_c.push_back(s.presquash);
        traj.log_probs.push_back(s.log_prob);
      }
      sr = env.step(std::span<const double>(action));
    }
    traj.rewards.push_back(sr.reward);
    done = sr.done;
    if (done) traj.terminated = !sr.truncated;
  }
  return traj;
}

}  // namespace dse
