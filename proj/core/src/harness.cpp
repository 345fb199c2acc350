#include "dse/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "dse/asteroid.hpp"
#include "dse/cartpole.hpp"
#include "dse/errors.hpp"
#include "dse/metrics.hpp"
#include "dse/reacher.hpp"
#include "dse/rng.hpp"

namespace dse {
namespace {

namespace fs = std::filesystem;

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

bool family_is_reacher(const std::string& family) {
  return family.rfind("reacher", 0) == 0;
}

std::string csv_num(double v) { return MetricsWriter::format_double(v); }

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// -- optimizer / table (de)serialization helpers -----------------------------

void save_optimizer(CheckpointData& d, const std::string& name,
                    const Optimizer& opt) {
  d.set_int(name + ".steps", opt.step_count);
  d.set_vec(name + ".m", opt.m);
  d.set_vec(name + ".v", opt.v);
}

void load_optimizer(const CheckpointData& d, const std::string& name,
                    Optimizer& opt) {
  opt.step_count = d.get_int(name + ".steps");
  opt.m = d.get_vec(name + ".m");
  opt.v = d.get_vec(name + ".v");
}

void assign_params(ParamVector& pv, const std::vector<double>& values,
                   const std::string& what) {
  if (pv.values.size() != values.size())
    throw ConfigError("checkpoint/config mismatch: " + what + " has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(pv.values.size()));
  pv.values = values;
  pv.zero_grads();
}

/// Restores just the shared artifacts (policy + embedding tables); used by
/// retraining, which rebuilds optimizers and critics from scratch.
void restore_shared(Policy& policy, VariationalEmbedding& qd,
                    VariationalEmbedding& qw, LatentMode mode,
                    const CheckpointData& d) {
  assign_params(policy.params, d.get_vec("policy.params"), "policy parameters");
  if (mode != LatentMode::kNone)
    assign_params(qd.params, d.get_vec("qd.params"), "dynamics table");
  if (mode == LatentMode::kDse)
    assign_params(qw.params, d.get_vec("qw.params"), "goal table");
}

// -- evaluation helpers ------------------------------------------------------

double rollout_return(Env& env, const Policy& policy, std::span<const double> z,
                      std::span<const double> g, uint64_t env_seed,
                      uint64_t action_seed, bool greedy) {
  Trajectory traj = rollout_policy(env, policy, z, g, env_seed, action_seed,
                                   greedy);
  double total = 0.0;
  for (double r : traj.rewards) total += r;
  return total;
}

double eval_mean_return(Env& env, const Policy& policy, std::span<const double> z,
                        std::span<const double> g, int episodes, uint64_t seed,
                        int i, int j, bool greedy) {
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const auto ui = static_cast<uint64_t>(i), uj = static_cast<uint64_t>(j);
    sum += rollout_return(
        env, policy, z, g,
        stream_seed(seed, ui, uj, static_cast<uint64_t>(e), RngPurpose::kEval),
        stream_seed(seed, ui, uj, static_cast<uint64_t>(e) + 0x10000,
                    RngPurpose::kEval),
        greedy);
  }
  return sum / episodes;
}

// -- early stopping ----------------------------------------------------------

/// Rolling-window return stop: satisfied once every tracked cell's last
/// `window` metric rows average at or above the target.
struct ReturnStop {
  bool enabled = false;
  double target = 0.0;
  std::size_t window = 1;
  std::vector<std::vector<double>> hist;  // ring per cell

  ReturnStop(bool enabled_, double target_, std::size_t window_, std::size_t cells)
      : enabled(enabled_), target(target_), window(std::max<std::size_t>(1, window_)),
        hist(cells) {}

  void record(std::size_t cell, double mean_return) {
    if (!enabled) return;
    auto& h = hist[cell];
    h.push_back(mean_return);
    if (h.size() > window) h.erase(h.begin());
  }

  bool satisfied() const {
    if (!enabled) return false;
    for (const auto& h : hist) {
      if (h.size() < window) return false;
      double s = 0.0;
      for (double v : h) s += v;
      if (s / h.size() < target) return false;
    }
    return true;
  }
};

}  // namespace

std::filesystem::path output_root() {
  if (const char* root = std::getenv("DSE_OUTPUT_ROOT"); root && *root)
    return fs::path(root);
  return fs::path(".");
}

std::filesystem::path prepare_run_dir(const ExperimentConfig& cfg) {
  fs::path dir = output_root() / cfg.output_dir;
  fs::create_directories(dir);
  std::ofstream out(dir / "config.txt");
  out << serialize_config(cfg);
  if (!out) throw ConfigError("cannot write to output directory " + dir.string());
  return dir;
}

Policy build_policy(const ExperimentConfig& cfg, bool discrete, int s_dim,
                    int act_dim, LatentMode mode, uint64_t init_i,
                    uint64_t init_j) {
  int zd = 0, gd = 0;
  InputMode input = InputMode::kStateOnly;
  switch (mode) {
    case LatentMode::kDse:
      zd = static_cast<int>(cfg.z_dim);
      gd = static_cast<int>(cfg.g_dim);
      input = parse_input_mode(cfg.input_mode);
      break;
    case LatentMode::kSingle:
      zd = static_cast<int>(cfg.z_dim + cfg.g_dim);
      input = parse_input_mode(cfg.input_mode);
      break;
    case LatentMode::kNone:
      break;
  }
  auto rng = make_stream(static_cast<uint64_t>(cfg.seed), init_i, init_j, 0,
                         RngPurpose::kInit);
  return make_policy(input, discrete, s_dim, zd, gd, act_dim, cfg.policy_hidden,
                     parse_activation(cfg.activation), rng);
}

namespace {

std::vector<TrainerCell> cells_for(const TaskGrid& grid,
                                   const std::vector<std::pair<int, int>>& which) {
  std::vector<TrainerCell> cells;
  cells.reserve(which.size());
  for (auto [i, j] : which)
    cells.push_back(TrainerCell{i, j, make_env(grid, i, j)});
  return cells;
}

}  // namespace

std::unique_ptr<ReinforceTrainer> build_reinforce_trainer(
    const ExperimentConfig& cfg, const TaskGrid& grid) {
  auto cells = cells_for(grid, grid.trained_cells());
  if (cells.empty()) throw ConfigError("mask leaves no trained cells");
  const Env& probe = *cells.front().env;
  Policy policy = build_policy(cfg, probe.discrete_actions(), probe.obs_dim(),
                               probe.discrete_actions() ? probe.num_actions()
                                                        : probe.action_dim(),
                               algorithm_latent_mode(cfg.algorithm));
  return std::make_unique<ReinforceTrainer>(
      to_reinforce_settings(cfg), std::move(cells), grid.rows(), grid.cols(),
      std::move(policy), static_cast<int>(cfg.z_dim),
      static_cast<int>(cfg.g_dim));
}

std::unique_ptr<SacTrainer> build_sac_trainer(const ExperimentConfig& cfg,
                                              const TaskGrid& grid) {
  auto cells = cells_for(grid, grid.trained_cells());
  if (cells.empty()) throw ConfigError("mask leaves no trained cells");
  const Env& probe = *cells.front().env;
  if (probe.discrete_actions())
    throw ConfigError("the off-policy trainer requires continuous actions");
  Policy policy = build_policy(cfg, false, probe.obs_dim(), probe.action_dim(),
                               algorithm_latent_mode(cfg.algorithm));
  return std::make_unique<SacTrainer>(
      to_sac_settings(cfg), std::move(cells), grid.rows(), grid.cols(),
      std::move(policy), static_cast<int>(cfg.z_dim),
      static_cast<int>(cfg.g_dim));
}

CheckpointData snapshot_reinforce(const ReinforceTrainer& t,
                                  const std::string& config_text) {
  CheckpointData d;
  d.config_text = config_text;
  d.set_int("iteration", t.iteration);
  d.set_vec("policy.params", t.policy.params.values);
  if (t.cfg.latent_mode != LatentMode::kNone)
    d.set_vec("qd.params", t.qd.params.values);
  if (t.cfg.latent_mode == LatentMode::kDse)
    d.set_vec("qw.params", t.qw.params.values);
  save_optimizer(d, "opt_theta", t.opt_theta);
  save_optimizer(d, "opt_qd", t.opt_qd);
  save_optimizer(d, "opt_qw", t.opt_qw);
  std::vector<double> mu, nu;
  for (const PopArt& p : t.popart) {
    mu.push_back(p.mu);
    nu.push_back(p.nu);
  }
  d.set_vec("popart.mu", mu);
  d.set_vec("popart.nu", nu);
  for (std::size_t k = 0; k < t.cells.size(); ++k)
    d.set_int("cell." + std::to_string(k) + ".episodes", t.episode_count[k]);
  return d;
}

void restore_reinforce(ReinforceTrainer& t, const CheckpointData& d) {
  restore_shared(t.policy, t.qd, t.qw, t.cfg.latent_mode, d);
  load_optimizer(d, "opt_theta", t.opt_theta);
  load_optimizer(d, "opt_qd", t.opt_qd);
  load_optimizer(d, "opt_qw", t.opt_qw);
  const auto& mu = d.get_vec("popart.mu");
  const auto& nu = d.get_vec("popart.nu");
  if (mu.size() != t.popart.size() || nu.size() != t.popart.size())
    throw ConfigError("checkpoint/config mismatch: normalizer cell count");
  for (std::size_t k = 0; k < t.popart.size(); ++k) {
    t.popart[k].mu = mu[k];
    t.popart[k].nu = nu[k];
  }
  t.iteration = d.get_int("iteration");
  for (std::size_t k = 0; k < t.cells.size(); ++k)
    t.episode_count[k] = d.get_int("cell." + std::to_string(k) + ".episodes");
}

CheckpointData snapshot_sac(const SacTrainer& t, const std::string& config_text) {
  CheckpointData d;
  d.config_text = config_text;
  d.set_int("iteration", t.iteration);
  d.set_vec("policy.params", t.policy.params.values);
  if (t.cfg.latent_mode != LatentMode::kNone)
    d.set_vec("qd.params", t.qd.params.values);
  if (t.cfg.latent_mode == LatentMode::kDse)
    d.set_vec("qw.params", t.qw.params.values);
  save_optimizer(d, "opt_theta", t.opt_theta);
  save_optimizer(d, "opt_qd", t.opt_qd);
  save_optimizer(d, "opt_qw", t.opt_qw);
  for (std::size_t k = 0; k < t.cells.size(); ++k) {
    const SacCell& c = t.cells[k];
    const std::string p = "cell." + std::to_string(k) + ".";
    d.set_int(p + "episodes", c.episodes);
    d.set_int(p + "episodes_started", c.episodes_started);
    d.set_vec(p + "q1", c.q1.values);
    d.set_vec(p + "q2", c.q2.values);
    d.set_vec(p + "v", c.v.values);
    d.set_vec(p + "v_target", c.v_target.values);
    save_optimizer(d, p + "opt_q1", c.opt_q1);
    save_optimizer(d, p + "opt_q2", c.opt_q2);
    save_optimizer(d, p + "opt_v", c.opt_v);
  }
  return d;
}

void restore_sac(SacTrainer& t, const CheckpointData& d) {
  restore_shared(t.policy, t.qd, t.qw, t.cfg.latent_mode, d);
  load_optimizer(d, "opt_theta", t.opt_theta);
  load_optimizer(d, "opt_qd", t.opt_qd);
  load_optimizer(d, "opt_qw", t.opt_qw);
  t.iteration = d.get_int("iteration");
  for (std::size_t k = 0; k < t.cells.size(); ++k) {
    SacCell& c = t.cells[k];
    const std::string p = "cell." + std::to_string(k) + ".";
    c.episodes = d.get_int(p + "episodes");
    c.episodes_started = d.get_int(p + "episodes_started");
    assign_params(c.q1, d.get_vec(p + "q1"), "critic");
    assign_params(c.q2, d.get_vec(p + "q2"), "critic");
    assign_params(c.v, d.get_vec(p + "v"), "value net");
    assign_params(c.v_target, d.get_vec(p + "v_target"), "target value net");
    load_optimizer(d, p + "opt_q1", c.opt_q1);
    load_optimizer(d, p + "opt_q2", c.opt_q2);
    load_optimizer(d, p + "opt_v", c.opt_v);
  }
}

FrozenRun load_frozen_run(const std::string& checkpoint_path) {
  CheckpointData d = load_checkpoint(checkpoint_path);
  FrozenRun run;
  run.cfg = parse_config_text(d.config_text);
  run.mode = algorithm_latent_mode(run.cfg.algorithm);
  run.grid = build_task_grid(run.cfg.family, run.cfg.mask);
  auto probe = make_env(run.grid, 0, 0);
  run.policy = build_policy(run.cfg, probe->discrete_actions(), probe->obs_dim(),
                            probe->discrete_actions() ? probe->num_actions()
                                                      : probe->action_dim(),
                            run.mode);
  auto rng = make_stream(static_cast<uint64_t>(run.cfg.seed), 0, 0, 1,
                         RngPurpose::kInit);
  if (run.mode == LatentMode::kDse) {
    run.qd.init(run.grid.rows(), static_cast<int>(run.cfg.z_dim), rng);
    run.qw.init(run.grid.cols(), static_cast<int>(run.cfg.g_dim), rng);
  } else if (run.mode == LatentMode::kSingle) {
    run.qd.init(run.grid.rows() * run.grid.cols(),
                static_cast<int>(run.cfg.z_dim + run.cfg.g_dim), rng);
  }
  restore_shared(run.policy, run.qd, run.qw, run.mode, d);
  return run;
}

double eval_final_distance(const TaskGrid& grid, int i, int j,
                           const Policy& policy, std::span<const double> z,
                           std::span<const double> g, int episodes,
                           uint64_t seed) {
  auto env = make_env(grid, i, j);
  auto* reacher = dynamic_cast<ReacherEnv*>(env.get());
  if (reacher == nullptr)
    throw ConfigError("distance evaluation needs a reacher task");
  const auto ui = static_cast<uint64_t>(i), uj = static_cast<uint64_t>(j);
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    rollout_policy(*env, policy, z, g,
                   stream_seed(seed, ui, uj, static_cast<uint64_t>(e),
                               RngPurpose::kEval),
                   stream_seed(seed, ui, uj, static_cast<uint64_t>(e) + 0x10000,
                               RngPurpose::kEval),
                   /*greedy=*/true);
    sum += reacher->distance_to_goal();
  }
  return sum / episodes;
}

double random_policy_return(Env& env, int episodes, uint64_t seed) {
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(stream_seed(seed, 0, 0, static_cast<uint64_t>(e), RngPurpose::kEval));
    auto rng = make_stream(seed, 1, 0, static_cast<uint64_t>(e), RngPurpose::kEval);
    bool done = false;
    while (!done) {
      StepResult r;
      if (env.discrete_actions()) {
        std::uniform_int_distribution<int> pick(0, env.num_actions() - 1);
        r = env.step(pick(rng));
      } else {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> a(env.action_dim());
        for (double& v : a) v = u(rng);
        r = env.step(std::span<const double>(a));
      }
      sum += r.reward;
      done = r.done;
    }
  }
  return sum / episodes;
}

namespace {

// -- shared run-loop plumbing -------------------------------------------------

struct RunFiles {
  MetricsWriter metrics;
  TimingsWriter timings;
  explicit RunFiles(const fs::path& dir)
      : metrics((dir / "metrics.csv").string()),
        timings((dir / "timings.csv").string()) {}
};

void write_latents(const fs::path& dir, LatentMode mode,
                   const VariationalEmbedding* qd,
                   const VariationalEmbedding* qw) {
  switch (mode) {
    case LatentMode::kDse:
      write_latent_dump((dir / "latents.csv").string(), qd, qw);
      break;
    case LatentMode::kSingle:
      write_latent_dump((dir / "latents.csv").string(), qd, nullptr);
      break;
    case LatentMode::kNone:
      write_latent_dump((dir / "latents.csv").string(), nullptr, nullptr);
      break;
  }
}

std::vector<double> row_mean(const VariationalEmbedding& emb, int row) {
  auto m = emb.mean(row);
  return {m.begin(), m.end()};
}

/// Latent values used by greedy evaluations: the variational means for the
/// cell (kSingle packs both into z; kNone yields empty vectors).
std::pair<std::vector<double>, std::vector<double>> eval_latents(
    LatentMode mode, const VariationalEmbedding& qd,
    const VariationalEmbedding& qw, int i, int j, int cols) {
  switch (mode) {
    case LatentMode::kDse:
      return {row_mean(qd, i), row_mean(qw, j)};
    case LatentMode::kSingle:
      return {row_mean(qd, i * cols + j), {}};
    case LatentMode::kNone:
      return {{}, {}};
  }
  return {{}, {}};
}

void write_summary(const fs::path& dir,
                   const std::vector<std::array<double, 4>>& rows,
                   bool with_distance) {
  std::ofstream out(dir / "summary.csv");
  out << (with_distance ? "i,j,mean_return,final_distance\n"
                        : "i,j,mean_return\n");
  for (const auto& r : rows) {
    out << static_cast<int>(r[0]) << ',' << static_cast<int>(r[1]) << ','
        << csv_num(r[2]);
    if (with_distance) out << ',' << csv_num(r[3]);
    out << '\n';
  }
}

void run_multitask_reinforce(const ExperimentConfig& cfg, const fs::path& dir) {
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trainer = build_reinforce_trainer(cfg, grid);
  RunFiles files(dir);
  const auto batch = static_cast<std::size_t>(std::max<std::int64_t>(1, cfg.rf_batch));
  ReturnStop stop(cfg.early_stop && cfg.target_return > 0.0, cfg.target_return,
                  static_cast<std::size_t>(cfg.stop_window) / batch,
                  trainer->cells.size());
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    auto rows = trainer->iterate();
    files.timings.write(trainer->iteration, elapsed_seconds(t0));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      files.metrics.write(rows[k]);
      stop.record(k, rows[k].mean_return);
    }
    if (stop.satisfied()) break;
  }
  files.metrics.flush();
  files.timings.flush();
  write_latents(dir, trainer->cfg.latent_mode, &trainer->qd, &trainer->qw);
  save_checkpoint((dir / "checkpoint.txt").string(),
                  snapshot_reinforce(*trainer, serialize_config(cfg)));
  const bool reacher = family_is_reacher(cfg.family);
  std::vector<std::array<double, 4>> summary;
  for (std::size_t k = 0; k < trainer->cells.size(); ++k) {
    const TrainerCell& c = trainer->cells[k];
    double ret = trainer->evaluate_cell(static_cast<int>(k),
                                        static_cast<int>(cfg.eval_episodes));
    double dist = 0.0;
    if (reacher) {
      auto [z, g] = eval_latents(trainer->cfg.latent_mode, trainer->qd,
                                 trainer->qw, c.i, c.j, grid.cols());
      dist = eval_final_distance(grid, c.i, c.j, trainer->policy, z, g,
                                 static_cast<int>(cfg.eval_episodes),
                                 trainer->cfg.run_seed);
    }
    summary.push_back({static_cast<double>(c.i), static_cast<double>(c.j), ret,
                       dist});
  }
  write_summary(dir, summary, reacher);
}

void run_multitask_sac(const ExperimentConfig& cfg, const fs::path& dir) {
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trainer = build_sac_trainer(cfg, grid);
  RunFiles files(dir);
  const bool reacher = family_is_reacher(cfg.family);
  const bool distance_stop =
      cfg.early_stop && cfg.target_distance > 0.0 && reacher;
  std::ofstream eval_out;
  if (reacher) {
    eval_out.open(dir / "eval.csv");
    eval_out << "iteration,i,j,final_distance\n";
  }
  auto eval_all = [&](std::int64_t iter) {
    bool all_close = true;
    for (const SacCell& c : trainer->cells) {
      auto [z, g] = eval_latents(trainer->cfg.latent_mode, trainer->qd,
                                 trainer->qw, c.i, c.j, grid.cols());
      double dist = eval_final_distance(grid, c.i, c.j, trainer->policy, z, g,
                                        static_cast<int>(cfg.eval_episodes),
                                        trainer->cfg.run_seed + 1);
      eval_out << iter << ',' << c.i << ',' << c.j << ',' << csv_num(dist)
               << '\n';
      all_close = all_close && dist < cfg.target_distance;
    }
    return all_close;
  };
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    auto rows = trainer->iterate();
    if (!rows.empty()) files.timings.write(trainer->iteration, elapsed_seconds(t0));
    for (const auto& r : rows) files.metrics.write(r);
    if (reacher && cfg.eval_every > 0 && trainer->iteration % cfg.eval_every == 0) {
      bool all_close = eval_all(trainer->iteration);
      if (distance_stop && all_close) break;
    }
  }
  files.metrics.flush();
  files.timings.flush();
  if (eval_out.is_open()) eval_out.flush();
  write_latents(dir, trainer->cfg.latent_mode, &trainer->qd, &trainer->qw);
  save_checkpoint((dir / "checkpoint.txt").string(),
                  snapshot_sac(*trainer, serialize_config(cfg)));
  std::vector<std::array<double, 4>> summary;
  for (const SacCell& c : trainer->cells) {
    auto [z, g] = eval_latents(trainer->cfg.latent_mode, trainer->qd,
                               trainer->qw, c.i, c.j, grid.cols());
    auto env = make_env(grid, c.i, c.j);
    double ret =
        eval_mean_return(*env, trainer->policy, z, g,
                         static_cast<int>(cfg.eval_episodes),
                         trainer->cfg.run_seed, c.i, c.j, /*greedy=*/true);
    double dist = reacher ? eval_final_distance(
                                grid, c.i, c.j, trainer->policy, z, g,
                                static_cast<int>(cfg.eval_episodes),
                                trainer->cfg.run_seed)
                          : 0.0;
    summary.push_back({static_cast<double>(c.i), static_cast<double>(c.j), ret,
                       dist});
  }
  write_summary(dir, summary, reacher);
}

void run_independent_reinforce(const ExperimentConfig& cfg, const fs::path& dir) {
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trained = grid.trained_cells();
  std::vector<std::unique_ptr<ReinforceTrainer>> trainers;
  for (auto [i, j] : trained) {
    std::vector<TrainerCell> cells;
    cells.push_back(TrainerCell{i, j, make_env(grid, i, j)});
    const Env& probe = *cells.front().env;
    Policy policy = build_policy(cfg, probe.discrete_actions(), probe.obs_dim(),
                                 probe.discrete_actions() ? probe.num_actions()
                                                          : probe.action_dim(),
                                 LatentMode::kNone, static_cast<uint64_t>(i),
                                 static_cast<uint64_t>(j));
    ReinforceSettings settings = to_reinforce_settings(cfg);
    settings.latent_mode = LatentMode::kNone;
    trainers.push_back(std::make_unique<ReinforceTrainer>(
        settings, std::move(cells), grid.rows(), grid.cols(), std::move(policy),
        0, 0));
  }
  RunFiles files(dir);
  const auto batch = static_cast<std::size_t>(std::max<std::int64_t>(1, cfg.rf_batch));
  ReturnStop stop(cfg.early_stop && cfg.target_return > 0.0, cfg.target_return,
                  static_cast<std::size_t>(cfg.stop_window) / batch,
                  trainers.size());
  std::vector<bool> active(trainers.size(), true);
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    bool any = false;
    for (std::size_t k = 0; k < trainers.size(); ++k) {
      if (!active[k]) continue;
      any = true;
      auto rows = trainers[k]->iterate();
      for (const auto& r : rows) {
        files.metrics.write(r);
        stop.record(k, r.mean_return);
      }
      if (stop.enabled && stop.hist[k].size() >= stop.window) {
        double s = 0.0;
        for (double v : stop.hist[k]) s += v;
        if (s / stop.hist[k].size() >= stop.target) active[k] = false;
      }
    }
    files.timings.write(it + 1, elapsed_seconds(t0));
    if (!any) break;
  }
  files.metrics.flush();
  files.timings.flush();
  write_latent_dump((dir / "latents.csv").string(), nullptr, nullptr);
  std::vector<std::array<double, 4>> summary;
  for (std::size_t k = 0; k < trainers.size(); ++k) {
    const TrainerCell& c = trainers[k]->cells.front();
    double ret = trainers[k]->evaluate_cell(0, static_cast<int>(cfg.eval_episodes));
    summary.push_back({static_cast<double>(c.i), static_cast<double>(c.j), ret,
                       0.0});
    save_checkpoint((dir / ("checkpoint_" + std::to_string(c.i) + "_" +
                            std::to_string(c.j) + ".txt"))
                        .string(),
                    snapshot_reinforce(*trainers[k], serialize_config(cfg)));
  }
  write_summary(dir, summary, false);
}

void run_independent_sac(const ExperimentConfig& cfg, const fs::path& dir) {
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trained = grid.trained_cells();
  std::vector<std::unique_ptr<SacTrainer>> trainers;
  for (auto [i, j] : trained) {
    std::vector<TrainerCell> cells;
    cells.push_back(TrainerCell{i, j, make_env(grid, i, j)});
    const Env& probe = *cells.front().env;
    Policy policy = build_policy(cfg, false, probe.obs_dim(), probe.action_dim(),
                                 LatentMode::kNone, static_cast<uint64_t>(i),
                                 static_cast<uint64_t>(j));
    SacSettings settings = to_sac_settings(cfg);
    settings.latent_mode = LatentMode::kNone;
    trainers.push_back(std::make_unique<SacTrainer>(
        settings, std::move(cells), grid.rows(), grid.cols(), std::move(policy),
        0, 0));
  }
  RunFiles files(dir);
  const bool reacher = family_is_reacher(cfg.family);
  std::ofstream eval_out;
  if (reacher) {
    eval_out.open(dir / "eval.csv");
    eval_out << "iteration,i,j,final_distance\n";
  }
  const bool distance_stop =
      cfg.early_stop && cfg.target_distance > 0.0 && reacher;
  std::vector<bool> active(trainers.size(), true);
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    bool any = false;
    for (std::size_t k = 0; k < trainers.size(); ++k) {
      if (!active[k]) continue;
      any = true;
      auto rows = trainers[k]->iterate();
      for (const auto& r : rows) files.metrics.write(r);
      if (reacher && cfg.eval_every > 0 &&
          trainers[k]->iteration % cfg.eval_every == 0) {
        const SacCell& c = trainers[k]->cells.front();
        double dist = eval_final_distance(grid, c.i, c.j, trainers[k]->policy,
                                          {}, {},
                                          static_cast<int>(cfg.eval_episodes),
                                          trainers[k]->cfg.run_seed + 1);
        eval_out << trainers[k]->iteration << ',' << c.i << ',' << c.j << ','
                 << csv_num(dist) << '\n';
        if (distance_stop && dist < cfg.target_distance) active[k] = false;
      }
    }
    files.timings.write(it + 1, elapsed_seconds(t0));
    if (!any) break;
  }
  files.metrics.flush();
  files.timings.flush();
  if (eval_out.is_open()) eval_out.flush();
  write_latent_dump((dir / "latents.csv").string(), nullptr, nullptr);
  std::vector<std::array<double, 4>> summary;
  for (std::size_t k = 0; k < trainers.size(); ++k) {
    const SacCell& c = trainers[k]->cells.front();
    auto env = make_env(grid, c.i, c.j);
    double ret = eval_mean_return(*env, trainers[k]->policy, {}, {},
                                  static_cast<int>(cfg.eval_episodes),
                                  trainers[k]->cfg.run_seed, c.i, c.j, true);
    double dist = reacher ? eval_final_distance(
                                grid, c.i, c.j, trainers[k]->policy, {}, {},
                                static_cast<int>(cfg.eval_episodes),
                                trainers[k]->cfg.run_seed)
                          : 0.0;
    summary.push_back({static_cast<double>(c.i), static_cast<double>(c.j), ret,
                       dist});
    save_checkpoint((dir / ("checkpoint_" + std::to_string(c.i) + "_" +
                            std::to_string(c.j) + ".txt"))
                        .string(),
                    snapshot_sac(*trainers[k], serialize_config(cfg)));
  }
  write_summary(dir, summary, reacher);
}

// -- HRL ----------------------------------------------------------------------

std::unique_ptr<Env> make_hrl_base(const ExperimentConfig& cfg,
                                   const TaskGrid* low_grid) {
  if (cfg.hrl_env == "asteroid-cartpole") {
    return std::make_unique<AsteroidCartpoleEnv>(
        static_cast<int>(cfg.hrl_n_asteroids),
        static_cast<int>(cfg.hrl_asteroid_type),
        static_cast<int>(cfg.hrl_max_steps));
  }
  if (cfg.hrl_env == "reacher-circle") {
    if (low_grid == nullptr)
      throw ConfigError("reacher-circle needs a low-level checkpoint for the "
                        "link lengths");
    const auto i = static_cast<std::size_t>(cfg.hrl_deploy_i);
    if (i >= low_grid->dynamics_params.size())
      throw ConfigError("hrl.deploy_i outside the low-level task grid");
    const auto& links = low_grid->dynamics_params[i];
    return std::make_unique<MovingGoalReacherEnv>(
        links[0], links[1], cfg.hrl_circle_radius,
        static_cast<int>(cfg.hrl_circle_period),
        static_cast<int>(cfg.hrl_max_steps));
  }
  throw ConfigError("unknown hrl.env '" + cfg.hrl_env + "'");
}

std::unique_ptr<Env> make_hrl_env(const ExperimentConfig& cfg,
                                  const FrozenRun* low) {
  auto base = make_hrl_base(cfg, low ? &low->grid : nullptr);
  if (algorithm_is_flat(cfg.algorithm)) return base;
  if (low == nullptr) throw ConfigError("hrl algorithms need a low-level checkpoint");
  if (low->mode != LatentMode::kDse)
    throw ConfigError("hrl needs a low-level run with separate z and g tables");
  const auto di = static_cast<int>(cfg.hrl_deploy_i);
  if (di < 0 || di >= low->grid.rows())
    throw ConfigError("hrl.deploy_i outside the low-level task grid");
  OptionSpec spec;
  spec.low_policy = low->policy;
  spec.z = row_mean(low->qd, di);
  spec.interval = static_cast<int>(cfg.hrl_interval);
  spec.stochastic_low = cfg.hrl_stochastic_low;
  if (cfg.hrl_env == "asteroid-cartpole") {
    for (int j = 0; j < low->grid.cols(); ++j)
      spec.g_points.push_back(row_mean(low->qw, j));
    for (auto& p : parse_point_list(cfg.hrl_extra_g_points))
      spec.g_points.push_back(std::move(p));
  } else {
    const int gd = low->qw.latent_dim;
    spec.g_lo.assign(gd, std::numeric_limits<double>::infinity());
    spec.g_hi.assign(gd, -std::numeric_limits<double>::infinity());
    for (int j = 0; j < low->grid.cols(); ++j) {
      auto m = low->qw.mean(j);
      auto ls = low->qw.log_std(j);
      for (int k = 0; k < gd; ++k) {
        const double sd = std::exp(ls[k]);
        spec.g_lo[k] = std::min(spec.g_lo[k], m[k] - cfg.hrl_g_box_sigma * sd);
        spec.g_hi[k] = std::max(spec.g_hi[k], m[k] + cfg.hrl_g_box_sigma * sd);
      }
    }
  }
  return std::make_unique<OptionEnv>(std::move(base), std::move(spec));
}

double hrl_tracking_error(Env& env) {
  Env* probe = &env;
  if (auto* opt = dynamic_cast<OptionEnv*>(probe)) probe = &opt->base();
  if (auto* mg = dynamic_cast<MovingGoalReacherEnv*>(probe))
    return mg->mean_distance();
  throw ConfigError("tracking error is only defined for reacher-circle runs");
}

void run_hrl(const ExperimentConfig& cfg, const fs::path& dir) {
  std::unique_ptr<FrozenRun> low;
  if (algorithm_is_hrl(cfg.algorithm) || cfg.hrl_env == "reacher-circle") {
    if (cfg.hrl_low_checkpoint.empty())
      throw ConfigError("missing required key: hrl.low_checkpoint");
    low = std::make_unique<FrozenRun>(load_frozen_run(cfg.hrl_low_checkpoint));
  }
  const bool circle = cfg.hrl_env == "reacher-circle";
  auto make_env_instance = [&] { return make_hrl_env(cfg, low.get()); };
  auto env = make_env_instance();
  Policy policy = build_policy(cfg, env->discrete_actions(), env->obs_dim(),
                               env->discrete_actions() ? env->num_actions()
                                                       : env->action_dim(),
                               LatentMode::kNone);

  RunFiles files(dir);
  std::ofstream eval_out;
  if (circle) {
    eval_out.open(dir / "eval.csv");
    eval_out << "iteration,episodes,tracking_error\n";
  }
  const bool distance_stop = cfg.early_stop && cfg.target_distance > 0.0 && circle;

  auto eval_tracking = [&](std::int64_t iter, std::int64_t episodes,
                           const Policy& pol) {
    auto eval_env = make_env_instance();
    double sum = 0.0;
    const int n = static_cast<int>(cfg.eval_episodes);
    for (int e = 0; e < n; ++e) {
      rollout_policy(*eval_env, pol, {}, {},
                     stream_seed(static_cast<uint64_t>(cfg.seed), 0, 0,
                                 static_cast<uint64_t>(e), RngPurpose::kEval),
                     stream_seed(static_cast<uint64_t>(cfg.seed), 0, 0,
                                 static_cast<uint64_t>(e) + 0x10000,
                                 RngPurpose::kEval),
                     /*greedy=*/true);
      sum += hrl_tracking_error(*eval_env);
    }
    const double err = sum / n;
    eval_out << iter << ',' << episodes << ',' << csv_num(err) << '\n';
    return err;
  };

  std::vector<TrainerCell> cells;
  cells.push_back(TrainerCell{0, 0, std::move(env)});

  if (algorithm_is_sac(cfg.algorithm)) {
    SacSettings settings = to_sac_settings(cfg);
    settings.latent_mode = LatentMode::kNone;
    SacTrainer trainer(settings, std::move(cells), 1, 1, std::move(policy), 0, 0);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      auto rows = trainer.iterate();
      if (!rows.empty()) files.timings.write(trainer.iteration, elapsed_seconds(t0));
      for (const auto& r : rows) files.metrics.write(r);
      if (circle && cfg.eval_every > 0 && trainer.iteration % cfg.eval_every == 0) {
        double err = eval_tracking(trainer.iteration, trainer.cells[0].episodes,
                                   trainer.policy);
        if (distance_stop && err < cfg.target_distance) break;
      }
    }
    files.metrics.flush();
    files.timings.flush();
    write_latent_dump((dir / "latents.csv").string(), nullptr, nullptr);
    save_checkpoint((dir / "checkpoint.txt").string(),
                    snapshot_sac(trainer, serialize_config(cfg)));
    auto eval_env = make_env_instance();
    double ret = eval_mean_return(*eval_env, trainer.policy, {}, {},
                                  static_cast<int>(cfg.eval_episodes),
                                  trainer.cfg.run_seed, 0, 0, true);
    std::vector<std::array<double, 4>> summary{
        {0.0, 0.0, ret, circle ? hrl_tracking_error(*eval_env) : 0.0}};
    write_summary(dir, summary, circle);
  } else {
    ReinforceSettings settings = to_reinforce_settings(cfg);
    settings.latent_mode = LatentMode::kNone;
    ReinforceTrainer trainer(settings, std::move(cells), 1, 1, std::move(policy),
                             0, 0);
    const auto batch = static_cast<std::size_t>(std::max<std::int64_t>(1, cfg.rf_batch));
    ReturnStop stop(cfg.early_stop && cfg.target_return > 0.0, cfg.target_return,
                    static_cast<std::size_t>(cfg.stop_window) / batch, 1);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      auto rows = trainer.iterate();
      files.timings.write(trainer.iteration, elapsed_seconds(t0));
      for (const auto& r : rows) {
        files.metrics.write(r);
        stop.record(0, r.mean_return);
      }
      if (circle && cfg.eval_every > 0 && trainer.iteration % cfg.eval_every == 0) {
        double err = eval_tracking(trainer.iteration, trainer.episode_count[0],
                                   trainer.policy);
        if (distance_stop && err < cfg.target_distance) break;
      }
      if (stop.satisfied()) break;
    }
    files.metrics.flush();
    files.timings.flush();
    write_latent_dump((dir / "latents.csv").string(), nullptr, nullptr);
    save_checkpoint((dir / "checkpoint.txt").string(),
                    snapshot_reinforce(trainer, serialize_config(cfg)));
    double ret = trainer.evaluate_cell(0, static_cast<int>(cfg.eval_episodes));
    double err = 0.0;
    if (circle) {
      auto eval_env = make_env_instance();
      rollout_policy(*eval_env, trainer.policy, {}, {},
                     stream_seed(static_cast<uint64_t>(cfg.seed), 0, 0, 0,
                                 RngPurpose::kEval),
                     stream_seed(static_cast<uint64_t>(cfg.seed), 0, 0, 0x10000,
                                 RngPurpose::kEval),
                     true);
      err = hrl_tracking_error(*eval_env);
    }
    std::vector<std::array<double, 4>> summary{{0.0, 0.0, ret, err}};
    write_summary(dir, summary, circle);
  }
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  fs::path dir = prepare_run_dir(cfg);
  if (algorithm_is_hrl(cfg.algorithm) || algorithm_is_flat(cfg.algorithm)) {
    run_hrl(cfg, dir);
  } else if (algorithm_is_independent(cfg.algorithm)) {
    if (algorithm_is_sac(cfg.algorithm))
      run_independent_sac(cfg, dir);
    else
      run_independent_reinforce(cfg, dir);
  } else if (algorithm_is_sac(cfg.algorithm)) {
    run_multitask_sac(cfg, dir);
  } else {
    run_multitask_reinforce(cfg, dir);
  }
}

void run_retrain(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                 const std::vector<std::pair<int, int>>& cells) {
  if (cells.empty()) throw ConfigError("retraining needs at least one cell");
  CheckpointData data = load_checkpoint(checkpoint_path);
  ExperimentConfig base = parse_config_text(data.config_text);
  if (base.family != cfg.family)
    throw ConfigError("checkpoint family '" + base.family +
                      "' does not match config family '" + cfg.family + "'");
  if (algorithm_latent_mode(base.algorithm) != algorithm_latent_mode(cfg.algorithm))
    throw ConfigError("checkpoint and config algorithms use different latent modes");
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  for (auto [i, j] : cells) {
    if (i < 0 || i >= grid.rows() || j < 0 || j >= grid.cols())
      throw ConfigError("retraining cell (" + std::to_string(i) + "," +
                        std::to_string(j) + ") outside the grid");
    if (grid.trained(i, j))
      throw ConfigError("retraining cell (" + std::to_string(i) + "," +
                        std::to_string(j) + ") overlaps the training mask");
  }
  fs::path dir = prepare_run_dir(cfg);

  const bool sac = algorithm_is_sac(cfg.algorithm);
  std::vector<std::array<double, 4>> initial;  // i, j, initial, random
  if (!sac) {
    auto cell_list = cells_for(grid, cells);
    const Env& probe = *cell_list.front().env;
    Policy policy = build_policy(cfg, probe.discrete_actions(), probe.obs_dim(),
                                 probe.discrete_actions() ? probe.num_actions()
                                                          : probe.action_dim(),
                                 algorithm_latent_mode(cfg.algorithm));
    ReinforceTrainer trainer(to_reinforce_settings(cfg), std::move(cell_list),
                             grid.rows(), grid.cols(), std::move(policy),
                             static_cast<int>(cfg.z_dim),
                             static_cast<int>(cfg.g_dim));
    restore_shared(trainer.policy, trainer.qd, trainer.qw,
                   trainer.cfg.latent_mode, data);
    for (std::size_t k = 0; k < trainer.cells.size(); ++k) {
      const TrainerCell& c = trainer.cells[k];
      double init_ret = trainer.evaluate_cell(static_cast<int>(k),
                                              static_cast<int>(cfg.eval_episodes));
      auto env = make_env(grid, c.i, c.j);
      double rand_ret = random_policy_return(
          *env, static_cast<int>(cfg.eval_episodes),
          trainer.cfg.run_seed + 7 * (c.i + 1) + 13 * (c.j + 1));
      initial.push_back({static_cast<double>(c.i), static_cast<double>(c.j),
                         init_ret, rand_ret});
    }
    std::ofstream init_out(dir / "initial_returns.csv");
    init_out << "i,j,initial_return,random_return\n";
    for (const auto& r : initial)
      init_out << static_cast<int>(r[0]) << ',' << static_cast<int>(r[1]) << ','
               << csv_num(r[2]) << ',' << csv_num(r[3]) << '\n';

    RunFiles files(dir);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      auto rows = trainer.iterate();
      files.timings.write(trainer.iteration, elapsed_seconds(t0));
      for (const auto& r : rows) files.metrics.write(r);
    }
    files.metrics.flush();
    files.timings.flush();
    write_latents(dir, trainer.cfg.latent_mode, &trainer.qd, &trainer.qw);
    save_checkpoint((dir / "checkpoint.txt").string(),
                    snapshot_reinforce(trainer, serialize_config(cfg)));
  } else {
    auto cell_list = cells_for(grid, cells);
    const Env& probe = *cell_list.front().env;
    Policy policy = build_policy(cfg, false, probe.obs_dim(), probe.action_dim(),
                                 algorithm_latent_mode(cfg.algorithm));
    SacTrainer trainer(to_sac_settings(cfg), std::move(cell_list), grid.rows(),
                       grid.cols(), std::move(policy),
                       static_cast<int>(cfg.z_dim), static_cast<int>(cfg.g_dim));
    restore_shared(trainer.policy, trainer.qd, trainer.qw,
                   trainer.cfg.latent_mode, data);
    for (const SacCell& c : trainer.cells) {
      auto [z, g] = eval_latents(trainer.cfg.latent_mode, trainer.qd,
                                 trainer.qw, c.i, c.j, grid.cols());
      auto env = make_env(grid, c.i, c.j);
      double init_ret = eval_mean_return(*env, trainer.policy, z, g,
                                         static_cast<int>(cfg.eval_episodes),
                                         trainer.cfg.run_seed, c.i, c.j, true);
      double rand_ret = random_policy_return(
          *env, static_cast<int>(cfg.eval_episodes),
          trainer.cfg.run_seed + 7 * (c.i + 1) + 13 * (c.j + 1));
      initial.push_back({static_cast<double>(c.i), static_cast<double>(c.j),
                         init_ret, rand_ret});
    }
    std::ofstream init_out(dir / "initial_returns.csv");
    init_out << "i,j,initial_return,random_return\n";
    for (const auto& r : initial)
      init_out << static_cast<int>(r[0]) << ',' << static_cast<int>(r[1]) << ','
               << csv_num(r[2]) << ',' << csv_num(r[3]) << '\n';

    RunFiles files(dir);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      auto rows = trainer.iterate();
      if (!rows.empty()) files.timings.write(trainer.iteration, elapsed_seconds(t0));
      for (const auto& r : rows) files.metrics.write(r);
    }
    files.metrics.flush();
    files.timings.flush();
    write_latents(dir, trainer.cfg.latent_mode, &trainer.qd, &trainer.qw);
    save_checkpoint((dir / "checkpoint.txt").string(),
                    snapshot_sac(trainer, serialize_config(cfg)));
  }
}

void run_interpolate(const std::string& checkpoint_path, const std::string& space,
                     const std::vector<std::vector<double>>& points,
                     int other_row, int env_i, int env_j, int episodes,
                     const std::string& output_dir) {
  if (space != "z" && space != "g")
    throw ConfigError("interpolation space must be 'z' or 'g'");
  if (points.empty()) throw ConfigError("no interpolation points given");
  FrozenRun run = load_frozen_run(checkpoint_path);
  if (run.mode != LatentMode::kDse)
    throw ConfigError("interpolation needs a run with separate z and g tables");
  const bool sweep_g = space == "g";
  const int want =
      sweep_g ? run.qw.latent_dim : run.qd.latent_dim;
  for (const auto& p : points)
    if (static_cast<int>(p.size()) != want)
      throw ConfigError("interpolation point has dimension " +
                        std::to_string(p.size()) + ", expected " +
                        std::to_string(want));
  const int fixed_rows = sweep_g ? run.grid.rows() : run.grid.cols();
  if (other_row < 0 || other_row >= fixed_rows)
    throw ConfigError("fixed-latent row outside the grid");
  if (env_i < 0 || env_i >= run.grid.rows() || env_j < 0 ||
      env_j >= run.grid.cols())
    throw ConfigError("evaluation cell outside the grid");

  fs::path dir = output_root() / output_dir;
  fs::create_directories(dir);
  const bool reacher = family_is_reacher(run.cfg.family);
  std::ofstream out(dir / "interpolation.csv");
  out << "point";
  for (int k = 0; k < want; ++k) out << ",v" << k;
  out << (reacher ? ",final_x,final_y\n" : ",mean_tip_x\n");

  auto env = make_env(run.grid, env_i, env_j);
  const std::vector<double> fixed =
      sweep_g ? row_mean(run.qd, other_row) : row_mean(run.qw, other_row);
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::span<const double> z = sweep_g ? std::span<const double>(fixed)
                                        : std::span<const double>(points[p]);
    std::span<const double> g = sweep_g ? std::span<const double>(points[p])
                                        : std::span<const double>(fixed);
    double tip_sum = 0.0;
    std::int64_t tip_n = 0;
    double fx = 0.0, fy = 0.0;
    for (int e = 0; e < episodes; ++e) {
      Trajectory traj = rollout_policy(
          *env, run.policy, z, g,
          stream_seed(static_cast<uint64_t>(run.cfg.seed), p,
                      static_cast<uint64_t>(e), 0, RngPurpose::kEval),
          stream_seed(static_cast<uint64_t>(run.cfg.seed), p,
                      static_cast<uint64_t>(e), 1, RngPurpose::kEval),
          /*greedy=*/true);
      if (reacher) {
        const auto& last = traj.states.back();
        fx += last[6];
        fy += last[7];
      } else {
        for (const auto& s : traj.states) {
          tip_sum += s[0] + 2.0 * kCartpoleHalfLength * std::sin(s[2]);
          ++tip_n;
        }
      }
    }
    out << p;
    for (double v : points[p]) out << ',' << csv_num(v);
    if (reacher)
      out << ',' << csv_num(fx / episodes) << ',' << csv_num(fy / episodes)
          << '\n';
    else
      out << ',' << csv_num(tip_sum / static_cast<double>(tip_n)) << '\n';
  }
  if (!out) throw ConfigError("cannot write interpolation results");
}

void run_fit_unseen(const std::string& checkpoint_path,
                    const std::vector<double>& dynamics,
                    const std::vector<double>& goal, std::int64_t iterations,
                    std::int64_t seed, const std::string& output_dir) {
  FrozenRun run = load_frozen_run(checkpoint_path);
  if (run.mode == LatentMode::kNone)
    throw ConfigError("this checkpoint has no task embeddings to fit");
  ExperimentConfig cfg = run.cfg;
  cfg.iterations = iterations >= 0 ? iterations : run.cfg.iterations;
  if (seed >= 0) cfg.seed = seed;
  cfg.output_dir = output_dir;
  cfg.early_stop = false;
  fs::path dir = prepare_run_dir(cfg);

  write_latent_dump((dir / "trained_latents.csv").string(), &run.qd,
                    run.mode == LatentMode::kDse ? &run.qw : nullptr);

  std::vector<TrainerCell> cells;
  cells.push_back(TrainerCell{0, 0, make_env_params(cfg.family, dynamics, goal)});
  const bool reacher = family_is_reacher(cfg.family);
  RunFiles files(dir);

  auto finish = [&](const Policy& policy, const VariationalEmbedding& qd,
                    const VariationalEmbedding* qw, double final_return,
                    double final_distance) {
    write_latent_dump((dir / "fitted_latents.csv").string(), &qd, qw);
    std::vector<std::array<double, 4>> summary{
        {0.0, 0.0, final_return, final_distance}};
    write_summary(dir, summary, reacher);
  };

  if (!algorithm_is_sac(cfg.algorithm)) {
    ReinforceSettings settings = to_reinforce_settings(cfg);
    ReinforceTrainer trainer(settings, std::move(cells), 1, 1, run.policy,
                             static_cast<int>(cfg.z_dim),
                             static_cast<int>(cfg.g_dim));
    trainer.train_policy = false;  // shared parameters stay frozen
    for (int r = 0; r < trainer.qd.index_count; ++r)
      trainer.qd.reset_row_to_prior(r);
    if (settings.latent_mode == LatentMode::kDse)
      for (int r = 0; r < trainer.qw.index_count; ++r)
        trainer.qw.reset_row_to_prior(r);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      auto rows = trainer.iterate();
      files.timings.write(trainer.iteration, elapsed_seconds(t0));
      for (const auto& r : rows) files.metrics.write(r);
    }
    files.metrics.flush();
    files.timings.flush();
    save_checkpoint((dir / "checkpoint.txt").string(),
                    snapshot_reinforce(trainer, serialize_config(cfg)));
    double ret = trainer.evaluate_cell(0, static_cast<int>(cfg.eval_episodes));
    finish(trainer.policy, trainer.qd,
           settings.latent_mode == LatentMode::kDse ? &trainer.qw : nullptr,
           ret, 0.0);
  } else {
    SacSettings settings = to_sac_settings(cfg);
    SacTrainer trainer(settings, std::move(cells), 1, 1, run.policy,
                       static_cast<int>(cfg.z_dim), static_cast<int>(cfg.g_dim));
    trainer.train_policy = false;  // shared parameters stay frozen
    for (int r = 0; r < trainer.qd.index_count; ++r)
      trainer.qd.reset_row_to_prior(r);
    if (settings.latent_mode == LatentMode::kDse)
      for (int r = 0; r < trainer.qw.index_count; ++r)
        trainer.qw.reset_row_to_prior(r);
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      auto rows = trainer.iterate();
      if (!rows.empty()) files.timings.write(trainer.iteration, elapsed_seconds(t0));
      for (const auto& r : rows) files.metrics.write(r);
    }
    files.metrics.flush();
    files.timings.flush();
    save_checkpoint((dir / "checkpoint.txt").string(),
                    snapshot_sac(trainer, serialize_config(cfg)));
    auto [z, g] = eval_latents(settings.latent_mode, trainer.qd, trainer.qw, 0,
                               0, 1);
    auto env = make_env_params(cfg.family, dynamics, goal);
    double ret = eval_mean_return(*env, trainer.policy, z, g,
                                  static_cast<int>(cfg.eval_episodes),
                                  trainer.cfg.run_seed, 0, 0, true);
    double dist = 0.0;
    if (reacher) {
      auto env2 = make_env_params(cfg.family, dynamics, goal);
      auto* rp = dynamic_cast<ReacherEnv*>(env2.get());
      for (int e = 0; e < cfg.eval_episodes; ++e) {
        rollout_policy(*env2, trainer.policy, z, g,
                       stream_seed(trainer.cfg.run_seed, 0, 0,
                                   static_cast<uint64_t>(e), RngPurpose::kEval),
                       stream_seed(trainer.cfg.run_seed, 0, 0,
                                   static_cast<uint64_t>(e) + 0x10000,
                                   RngPurpose::kEval),
                       true);
        dist += rp->distance_to_goal();
      }
      dist /= static_cast<double>(cfg.eval_episodes);
    }
    finish(trainer.policy, trainer.qd,
           settings.latent_mode == LatentMode::kDse ? &trainer.qw : nullptr,
           ret, dist);
  }
}

std::vector<std::pair<int, int>> parse_cell_list(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    auto comma = item.find(',');
    if (comma == std::string::npos)
      throw ConfigError("bad cell '" + item + "' (want i,j;i,j)");
    try {
      int i = std::stoi(item.substr(0, comma));
      int j = std::stoi(item.substr(comma + 1));
      out.emplace_back(i, j);
    } catch (const std::exception&) {
      throw ConfigError("bad cell '" + item + "' (want i,j;i,j)");
    }
  }
  if (out.empty()) throw ConfigError("empty cell list");
  return out;
}

}  // namespace dse
