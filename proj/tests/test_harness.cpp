// End-to-end behavior of the run harness: output layout, checkpoint
// round-trips that resume training exactly, the experiment recipes and the
// artifact files they produce, and the error paths of the retrain /
// interpolate / fit-unseen entry points.

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dse/config.hpp"
#include "dse/errors.hpp"
#include "dse/harness.hpp"
#include "dse/rng.hpp"
#include "dse/task_grid.hpp"

namespace fs = std::filesystem;
using namespace dse;

namespace {

// Fresh output root per test so runs never collide; DSE_OUTPUT_ROOT points
// at it for the lifetime of the guard.
struct ScopedRoot {
  fs::path dir;
  ScopedRoot() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("dse_harness_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
    fs::create_directories(dir);
    ::setenv("DSE_OUTPUT_ROOT", dir.string().c_str(), 1);
  }
  ~ScopedRoot() {
    ::unsetenv("DSE_OUTPUT_ROOT");
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] != b[k]) return false;
  return true;
}

// Small on-policy cartpole experiment that finishes in well under a second.
ExperimentConfig tiny_reinforce_cfg() {
  ExperimentConfig cfg;
  cfg.algorithm = "dse-reinforce";
  cfg.family = "cartpole3x3";
  cfg.mask = "four-five";
  cfg.seed = 11;
  cfg.iterations = 2;
  cfg.output_dir = "run";
  cfg.policy_hidden = {8};
  cfg.rf_batch = 1;
  cfg.eval_episodes = 1;
  return cfg;
}

void check_optimizers_equal(const Optimizer& a, const Optimizer& b) {
  CHECK(a.step_count == b.step_count);
  CHECK(same_values(a.m, b.m));
  CHECK(same_values(a.v, b.v));
}

}  // namespace

TEST_CASE("run directories are rooted at DSE_OUTPUT_ROOT") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.output_dir = "nested/layout";

  CHECK(output_root() == root.dir);
  fs::path dir = prepare_run_dir(cfg);
  CHECK(dir == root.dir / "nested/layout");
  CHECK(fs::is_directory(dir));
  CHECK(read_file(dir / "config.txt") == serialize_config(cfg));
}

TEST_CASE("policy construction is deterministic in the config seed") {
  ExperimentConfig cfg = tiny_reinforce_cfg();
  Policy a = build_policy(cfg, true, 4, 2, LatentMode::kDse);
  Policy b = build_policy(cfg, true, 4, 2, LatentMode::kDse);
  CHECK(same_values(a.params.values, b.params.values));
  CHECK(a.z_dim == 2);
  CHECK(a.g_dim == 2);

  Policy c = build_policy(cfg, true, 4, 2, LatentMode::kDse, /*init_i=*/1);
  CHECK_FALSE(same_values(a.params.values, c.params.values));

  Policy folded = build_policy(cfg, true, 4, 2, LatentMode::kSingle);
  CHECK(folded.z_dim == 4);  // z and g share one block
  CHECK(folded.g_dim == 0);

  Policy bare = build_policy(cfg, true, 4, 2, LatentMode::kNone);
  CHECK(bare.z_dim == 0);
  CHECK(bare.g_dim == 0);
  CHECK(bare.input_dim() == 4);
}

TEST_CASE("on-policy checkpoints resume bit-for-bit") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);

  auto straight = build_reinforce_trainer(cfg, grid);
  std::vector<MetricsRow> tail;
  for (int it = 0; it < 4; ++it) {
    auto rows = straight->iterate();
    if (it >= 2) tail.insert(tail.end(), rows.begin(), rows.end());
  }

  auto first_leg = build_reinforce_trainer(cfg, grid);
  first_leg->iterate();
  first_leg->iterate();
  const fs::path ckpt = root.dir / "resume.txt";
  save_checkpoint(ckpt.string(),
                  snapshot_reinforce(*first_leg, serialize_config(cfg)));

  auto resumed = build_reinforce_trainer(cfg, grid);
  restore_reinforce(*resumed, load_checkpoint(ckpt.string()));
  CHECK(resumed->iteration == 2);
  for (std::size_t k = 0; k < resumed->cells.size(); ++k)
    CHECK(resumed->episode_count[k] == first_leg->episode_count[k]);

  std::vector<MetricsRow> resumed_rows;
  for (int it = 0; it < 2; ++it) {
    auto rows = resumed->iterate();
    resumed_rows.insert(resumed_rows.end(), rows.begin(), rows.end());
  }

  CHECK(resumed->iteration == straight->iteration);
  CHECK(same_values(resumed->policy.params.values,
                    straight->policy.params.values));
  CHECK(same_values(resumed->qd.params.values, straight->qd.params.values));
  CHECK(same_values(resumed->qw.params.values, straight->qw.params.values));
  check_optimizers_equal(resumed->opt_theta, straight->opt_theta);
  check_optimizers_equal(resumed->opt_qd, straight->opt_qd);
  check_optimizers_equal(resumed->opt_qw, straight->opt_qw);
  REQUIRE(resumed->popart.size() == straight->popart.size());
  for (std::size_t k = 0; k < resumed->popart.size(); ++k) {
    CHECK(resumed->popart[k].mu == straight->popart[k].mu);
    CHECK(resumed->popart[k].nu == straight->popart[k].nu);
  }
  for (std::size_t k = 0; k < resumed->cells.size(); ++k)
    CHECK(resumed->episode_count[k] == straight->episode_count[k]);

  REQUIRE(resumed_rows.size() == tail.size());
  for (std::size_t k = 0; k < tail.size(); ++k) {
    CHECK(resumed_rows[k].iteration == tail[k].iteration);
    CHECK(resumed_rows[k].i == tail[k].i);
    CHECK(resumed_rows[k].j == tail[k].j);
    CHECK(resumed_rows[k].episodes == tail[k].episodes);
    CHECK(resumed_rows[k].mean_return == tail[k].mean_return);
    CHECK(resumed_rows[k].loss == tail[k].loss);
    CHECK(resumed_rows[k].kl_z == tail[k].kl_z);
    CHECK(resumed_rows[k].kl_g == tail[k].kl_g);
  }
}

TEST_CASE("off-policy checkpoints restore nets and counters") {
  ScopedRoot root;
  ExperimentConfig cfg;
  cfg.algorithm = "dse-sac";
  cfg.family = "reacher2x4";
  cfg.seed = 21;
  cfg.output_dir = "sac";
  cfg.policy_hidden = {8};
  cfg.sac_critic_hidden = {8};
  cfg.sac_batch = 8;
  cfg.sac_warmup = 16;
  cfg.sac_replay_capacity = 2048;
  cfg.metrics_every = 2;
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);

  auto source = build_sac_trainer(cfg, grid);
  for (int it = 0; it < 3; ++it) source->iterate();
  const fs::path ckpt = root.dir / "sac_resume.txt";
  save_checkpoint(ckpt.string(),
                  snapshot_sac(*source, serialize_config(cfg)));
  CheckpointData data = load_checkpoint(ckpt.string());

  auto restored_a = build_sac_trainer(cfg, grid);
  auto restored_b = build_sac_trainer(cfg, grid);
  restore_sac(*restored_a, data);
  restore_sac(*restored_b, data);

  CHECK(restored_a->iteration == source->iteration);
  REQUIRE(restored_a->cells.size() == source->cells.size());
  for (std::size_t k = 0; k < source->cells.size(); ++k) {
    CHECK(restored_a->cells[k].episodes == source->cells[k].episodes);
    CHECK(restored_a->cells[k].episodes_started ==
          source->cells[k].episodes_started);
    CHECK(same_values(restored_a->cells[k].q1.values,
                      source->cells[k].q1.values));
    CHECK(same_values(restored_a->cells[k].q2.values,
                      source->cells[k].q2.values));
    CHECK(same_values(restored_a->cells[k].v.values,
                      source->cells[k].v.values));
    CHECK(same_values(restored_a->cells[k].v_target.values,
                      source->cells[k].v_target.values));
  }
  CHECK(same_values(restored_a->policy.params.values,
                    source->policy.params.values));
  CHECK(same_values(restored_a->qd.params.values, source->qd.params.values));
  CHECK(same_values(restored_a->qw.params.values, source->qw.params.values));

  // Replay memories are not serialized, so restored runs are only guaranteed
  // to match each other, not an uninterrupted run.
  for (int it = 0; it < 2; ++it) {
    restored_a->iterate();
    restored_b->iterate();
  }
  CHECK(same_values(restored_a->policy.params.values,
                    restored_b->policy.params.values));
  CHECK(same_values(restored_a->qd.params.values, restored_b->qd.params.values));
  CHECK(same_values(restored_a->qw.params.values, restored_b->qw.params.values));
  for (std::size_t k = 0; k < restored_a->cells.size(); ++k) {
    CHECK(same_values(restored_a->cells[k].q1.values,
                      restored_b->cells[k].q1.values));
    CHECK(same_values(restored_a->cells[k].v_target.values,
                      restored_b->cells[k].v_target.values));
  }
}

TEST_CASE("frozen runs rebuild from a checkpoint alone") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trainer = build_reinforce_trainer(cfg, grid);
  const fs::path ckpt = root.dir / "frozen.txt";
  save_checkpoint(ckpt.string(),
                  snapshot_reinforce(*trainer, serialize_config(cfg)));

  FrozenRun run = load_frozen_run(ckpt.string());
  CHECK(run.mode == LatentMode::kDse);
  CHECK(run.cfg == cfg);
  CHECK(run.grid.rows() == 3);
  CHECK(run.grid.cols() == 3);
  CHECK(same_values(run.policy.params.values, trainer->policy.params.values));
  CHECK(same_values(run.qd.params.values, trainer->qd.params.values));
  CHECK(same_values(run.qw.params.values, trainer->qw.params.values));

  ExperimentConfig folded = cfg;
  folded.algorithm = "single-embedding-reinforce";
  auto folded_trainer = build_reinforce_trainer(folded, grid);
  const fs::path ckpt2 = root.dir / "frozen_single.txt";
  save_checkpoint(ckpt2.string(),
                  snapshot_reinforce(*folded_trainer, serialize_config(folded)));
  FrozenRun run2 = load_frozen_run(ckpt2.string());
  CHECK(run2.mode == LatentMode::kSingle);
  CHECK(run2.qd.index_count == 9);  // one row per (i, j) pair
  CHECK(run2.qd.latent_dim == 4);
  CHECK(same_values(run2.qd.params.values, folded_trainer->qd.params.values));
}

TEST_CASE("greedy distance evaluation is repeatable and reacher-only") {
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.family = "reacher2x4";
  cfg.mask = "full";
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  Policy policy = build_policy(cfg, false, 8, 2, LatentMode::kDse);
  const std::vector<double> z{0.0, 0.0}, g{0.0, 0.0};

  double d1 = eval_final_distance(grid, 0, 1, policy, z, g, 2, 5);
  double d2 = eval_final_distance(grid, 0, 1, policy, z, g, 2, 5);
  CHECK(d1 == d2);
  CHECK(d1 > 0.0);
  CHECK(d1 < 1.0);

  TaskGrid cart = build_task_grid("cartpole3x3", "full");
  Policy cart_policy = build_policy(tiny_reinforce_cfg(), true, 4, 2,
                                    LatentMode::kDse);
  CHECK_THROWS_WITH_AS(
      eval_final_distance(cart, 0, 0, cart_policy, z, g, 1, 5),
      "distance evaluation needs a reacher task", ConfigError);
}

TEST_CASE("random play baseline is deterministic and bounded") {
  TaskGrid cart = build_task_grid("cartpole3x3", "full");
  auto env = make_env(cart, 1, 1);
  double r1 = random_policy_return(*env, 3, 9);
  double r2 = random_policy_return(*env, 3, 9);
  CHECK(r1 == r2);
  CHECK(r1 >= 0.0);
  CHECK(r1 <= 300.0);

  TaskGrid reach = build_task_grid("reacher2x4", "full");
  auto arm = make_env(reach, 0, 0);
  double r3 = random_policy_return(*arm, 2, 9);
  CHECK(r3 == random_policy_return(*arm, 2, 9));
  CHECK(r3 > -1000.0);
  CHECK(r3 < 150.0);
}

TEST_CASE("experiment runs drop a complete artifact set") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.output_dir = "a";
  run_experiment(cfg);

  const fs::path dir = root.dir / "a";
  for (const char* name : {"config.txt", "metrics.csv", "timings.csv",
                           "latents.csv", "checkpoint.txt", "summary.csv"})
    CHECK(fs::exists(dir / name));

  const std::string metrics = read_file(dir / "metrics.csv");
  CHECK(metrics.rfind("iteration,i,j,episodes,mean_return,", 0) == 0);
  CHECK(count_lines(metrics) == 1 + 2 * 4);  // 2 iterations x 4 trained cells

  const std::string latents = read_file(dir / "latents.csv");
  CHECK(latents.rfind("space,index,dim,mean,std\n", 0) == 0);
  CHECK(count_lines(latents) == 1 + 3 * 2 + 3 * 2);  // both 3-row tables, dim 2

  const std::string summary = read_file(dir / "summary.csv");
  CHECK(summary.rfind("i,j,mean_return\n", 0) == 0);
  CHECK(count_lines(summary) == 1 + 4);

  // The same experiment under another directory reproduces the training
  // byte for byte; only wall-clock timings may differ.
  ExperimentConfig again = cfg;
  again.output_dir = "b";
  run_experiment(again);
  CHECK(read_file(root.dir / "b" / "metrics.csv") == metrics);
  CHECK(read_file(root.dir / "b" / "latents.csv") == latents);
}

TEST_CASE("per-task baseline runs save one checkpoint per cell") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.algorithm = "independent-reinforce";
  cfg.iterations = 1;
  cfg.output_dir = "indep";
  run_experiment(cfg);

  const fs::path dir = root.dir / "indep";
  CHECK(read_file(dir / "latents.csv") == "space,index,dim,mean,std\n");
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  for (auto [i, j] : grid.trained_cells())
    CHECK(fs::exists(dir / ("checkpoint_" + std::to_string(i) + "_" +
                            std::to_string(j) + ".txt")));
  CHECK(count_lines(read_file(dir / "summary.csv")) == 1 + 4);
}

TEST_CASE("retraining held-out cells starts from the shared checkpoint") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.mask = "six-three";
  cfg.iterations = 1;
  cfg.output_dir = "src";
  run_experiment(cfg);
  const std::string ckpt = (root.dir / "src" / "checkpoint.txt").string();

  ExperimentConfig re = cfg;
  re.output_dir = "re";
  run_retrain(re, ckpt, {{0, 0}});
  const fs::path dir = root.dir / "re";
  const std::string initial = read_file(dir / "initial_returns.csv");
  CHECK(initial.rfind("i,j,initial_return,random_return\n", 0) == 0);
  CHECK(count_lines(initial) == 2);
  CHECK(initial.find("\n0,0,") != std::string::npos);
  for (const char* name : {"metrics.csv", "latents.csv", "checkpoint.txt"})
    CHECK(fs::exists(dir / name));

  CHECK_THROWS_WITH_AS(run_retrain(re, ckpt, {}),
                       "retraining needs at least one cell", ConfigError);
  CHECK_THROWS_WITH_AS(run_retrain(re, ckpt, {{0, 1}}),
                       "retraining cell (0,1) overlaps the training mask",
                       ConfigError);
  CHECK_THROWS_WITH_AS(run_retrain(re, ckpt, {{7, 7}}),
                       "retraining cell (7,7) outside the grid", ConfigError);

  ExperimentConfig wrong_family = re;
  wrong_family.family = "reacher2x4";
  wrong_family.mask = "full";
  CHECK_THROWS_WITH_AS(run_retrain(wrong_family, ckpt, {{0, 0}}),
                       "checkpoint family 'cartpole3x3' does not match config "
                       "family 'reacher2x4'",
                       ConfigError);

  ExperimentConfig wrong_mode = re;
  wrong_mode.algorithm = "single-embedding-reinforce";
  CHECK_THROWS_WITH_AS(
      run_retrain(wrong_mode, ckpt, {{0, 0}}),
      "checkpoint and config algorithms use different latent modes",
      ConfigError);
}

TEST_CASE("latent interpolation sweeps one factor at fixed everything else") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.mask = "full";
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trainer = build_reinforce_trainer(cfg, grid);
  const fs::path ckpt = root.dir / "interp_src.txt";
  save_checkpoint(ckpt.string(),
                  snapshot_reinforce(*trainer, serialize_config(cfg)));

  const std::vector<std::vector<double>> pts{{0.0, 0.0}, {0.5, 0.5}, {1.0, 1.0}};
  run_interpolate(ckpt.string(), "g", pts, 0, 0, 1, 1, "interp");
  const std::string csv = read_file(root.dir / "interp" / "interpolation.csv");
  CHECK(csv.rfind("point,v0,v1,mean_tip_x\n", 0) == 0);
  CHECK(count_lines(csv) == 1 + 3);
  CHECK(csv.find("\n1,0.5,0.5,") != std::string::npos);

  // Reacher sweeps report the mean final tip position instead.
  ExperimentConfig arm = cfg;
  arm.family = "reacher2x4";
  arm.output_dir = "arm_src";
  TaskGrid arm_grid = build_task_grid(arm.family, arm.mask);
  auto arm_trainer = build_reinforce_trainer(arm, arm_grid);
  const fs::path arm_ckpt = root.dir / "arm_src.txt";
  save_checkpoint(arm_ckpt.string(),
                  snapshot_reinforce(*arm_trainer, serialize_config(arm)));
  run_interpolate(arm_ckpt.string(), "z", {{0.0, 0.0}, {1.0, -1.0}}, 1, 0, 1, 1,
                  "arm_interp");
  const std::string arm_csv =
      read_file(root.dir / "arm_interp" / "interpolation.csv");
  CHECK(arm_csv.rfind("point,v0,v1,final_x,final_y\n", 0) == 0);
  CHECK(count_lines(arm_csv) == 1 + 2);

  CHECK_THROWS_WITH_AS(run_interpolate(ckpt.string(), "q", pts, 0, 0, 1, 1, "x"),
                       "interpolation space must be 'z' or 'g'", ConfigError);
  CHECK_THROWS_WITH_AS(run_interpolate(ckpt.string(), "g", {}, 0, 0, 1, 1, "x"),
                       "no interpolation points given", ConfigError);
  CHECK_THROWS_WITH_AS(
      run_interpolate(ckpt.string(), "g", {{1.0, 2.0, 3.0}}, 0, 0, 1, 1, "x"),
      "interpolation point has dimension 3, expected 2", ConfigError);
  CHECK_THROWS_WITH_AS(run_interpolate(ckpt.string(), "g", pts, 9, 0, 1, 1, "x"),
                       "fixed-latent row outside the grid", ConfigError);
  CHECK_THROWS_WITH_AS(run_interpolate(ckpt.string(), "g", pts, 0, 5, 1, 1, "x"),
                       "evaluation cell outside the grid", ConfigError);

  ExperimentConfig folded = cfg;
  folded.algorithm = "single-embedding-reinforce";
  auto folded_trainer = build_reinforce_trainer(folded, grid);
  const fs::path folded_ckpt = root.dir / "folded.txt";
  save_checkpoint(folded_ckpt.string(),
                  snapshot_reinforce(*folded_trainer, serialize_config(folded)));
  CHECK_THROWS_WITH_AS(
      run_interpolate(folded_ckpt.string(), "g", pts, 0, 0, 1, 1, "x"),
      "interpolation needs a run with separate z and g tables", ConfigError);
}

TEST_CASE("fitting a new task keeps the shared policy frozen") {
  ScopedRoot root;
  ExperimentConfig cfg = tiny_reinforce_cfg();
  cfg.mask = "full";
  TaskGrid grid = build_task_grid(cfg.family, cfg.mask);
  auto trainer = build_reinforce_trainer(cfg, grid);
  const fs::path ckpt = root.dir / "fit_src.txt";
  save_checkpoint(ckpt.string(),
                  snapshot_reinforce(*trainer, serialize_config(cfg)));

  // Zero fitting iterations leaves the fresh rows exactly at the prior.
  run_fit_unseen(ckpt.string(), {1.5}, {0.5}, 0, 3, "fit0");
  const fs::path dir0 = root.dir / "fit0";
  CHECK(read_file(dir0 / "fitted_latents.csv") ==
        "space,index,dim,mean,std\n"
        "z,0,0,0,1\nz,0,1,0,1\ng,0,0,0,1\ng,0,1,0,1\n");
  const std::string trained = read_file(dir0 / "trained_latents.csv");
  CHECK(count_lines(trained) == 1 + 3 * 2 + 3 * 2);
  for (const char* name : {"config.txt", "metrics.csv", "checkpoint.txt",
                           "summary.csv"})
    CHECK(fs::exists(dir0 / name));

  // With fitting iterations the embeddings move but the policy does not.
  run_fit_unseen(ckpt.string(), {1.5}, {0.5}, 2, 3, "fit2");
  CheckpointData after =
      load_checkpoint((root.dir / "fit2" / "checkpoint.txt").string());
  CHECK(same_values(after.get_vec("policy.params"),
                    trainer->policy.params.values));
  CHECK(count_lines(read_file(root.dir / "fit2" / "metrics.csv")) == 1 + 2);

  // Latent-free checkpoints have nothing to fit.
  ExperimentConfig bare = cfg;
  bare.algorithm = "independent-reinforce";
  std::vector<TrainerCell> cells;
  cells.push_back(TrainerCell{0, 0, make_env(grid, 0, 0)});
  const Env& probe = *cells.front().env;
  Policy policy = build_policy(bare, probe.discrete_actions(), probe.obs_dim(),
                               probe.num_actions(), LatentMode::kNone);
  ReinforceTrainer solo(to_reinforce_settings(bare), std::move(cells), 1, 1,
                        std::move(policy), 0, 0);
  const fs::path bare_ckpt = root.dir / "bare.txt";
  save_checkpoint(bare_ckpt.string(),
                  snapshot_reinforce(solo, serialize_config(bare)));
  CHECK_THROWS_WITH_AS(run_fit_unseen(bare_ckpt.string(), {1.0}, {0.0}, 0, 3, "x"),
                       "this checkpoint has no task embeddings to fit",
                       ConfigError);
}

TEST_CASE("hierarchical runs train over options from a frozen low level") {
  ScopedRoot root;
  ExperimentConfig low = tiny_reinforce_cfg();
  low.mask = "full";
  TaskGrid grid = build_task_grid(low.family, low.mask);
  auto low_trainer = build_reinforce_trainer(low, grid);
  const fs::path low_ckpt = root.dir / "low.txt";
  save_checkpoint(low_ckpt.string(),
                  snapshot_reinforce(*low_trainer, serialize_config(low)));

  ExperimentConfig hrl = tiny_reinforce_cfg();
  hrl.algorithm = "hrl-reinforce";
  hrl.output_dir = "hrl";
  hrl.iterations = 1;
  hrl.hrl_env = "asteroid-cartpole";
  hrl.hrl_low_checkpoint = low_ckpt.string();
  hrl.hrl_max_steps = 40;
  hrl.hrl_interval = 10;
  run_experiment(hrl);
  const fs::path dir = root.dir / "hrl";
  CHECK(fs::exists(dir / "checkpoint.txt"));
  CHECK(count_lines(read_file(dir / "metrics.csv")) == 2);
  CHECK(count_lines(read_file(dir / "summary.csv")) == 2);

  ExperimentConfig missing = hrl;
  missing.hrl_low_checkpoint.clear();
  CHECK_THROWS_WITH_AS(run_experiment(missing),
                       "missing required key: hrl.low_checkpoint", ConfigError);

  ExperimentConfig strange = hrl;
  strange.algorithm = "flat-reinforce";
  strange.output_dir = "strange";
  strange.hrl_env = "zeppelin";
  CHECK_THROWS_WITH_AS(run_experiment(strange), "unknown hrl.env 'zeppelin'",
                       ConfigError);
}

TEST_CASE("flat baselines run directly on the hierarchical environments") {
  ScopedRoot root;
  ExperimentConfig flat = tiny_reinforce_cfg();
  flat.algorithm = "flat-reinforce";
  flat.output_dir = "flat";
  flat.iterations = 1;
  flat.hrl_env = "asteroid-cartpole";
  flat.hrl_max_steps = 50;
  run_experiment(flat);
  CHECK(fs::exists(root.dir / "flat" / "checkpoint.txt"));
  CHECK(count_lines(read_file(root.dir / "flat" / "metrics.csv")) == 2);

  // The moving-goal variant needs the low-level links even for flat runs,
  // and records tracking error in eval.csv.
  ExperimentConfig low = tiny_reinforce_cfg();
  low.family = "reacher2x4";
  low.mask = "full";
  TaskGrid grid = build_task_grid(low.family, low.mask);
  auto low_trainer = build_reinforce_trainer(low, grid);
  const fs::path low_ckpt = root.dir / "low_arm.txt";
  save_checkpoint(low_ckpt.string(),
                  snapshot_reinforce(*low_trainer, serialize_config(low)));

  ExperimentConfig circle = tiny_reinforce_cfg();
  circle.algorithm = "flat-sac";
  circle.family = "reacher2x4";
  circle.mask = "full";
  circle.output_dir = "circle";
  circle.iterations = 20;
  circle.eval_every = 0;
  circle.eval_episodes = 1;
  circle.policy_hidden = {8};
  circle.sac_critic_hidden = {8};
  circle.sac_batch = 8;
  circle.sac_warmup = 16;
  circle.sac_replay_capacity = 2048;
  circle.metrics_every = 10;
  circle.hrl_env = "reacher-circle";
  circle.hrl_low_checkpoint = low_ckpt.string();
  circle.hrl_max_steps = 60;
  circle.hrl_circle_period = 30;
  run_experiment(circle);
  const fs::path cdir = root.dir / "circle";
  CHECK(fs::exists(cdir / "eval.csv"));
  CHECK(read_file(cdir / "eval.csv")
            .rfind("iteration,episodes,tracking_error\n", 0) == 0);
  const std::string summary = read_file(cdir / "summary.csv");
  CHECK(summary.rfind("i,j,mean_return,final_distance\n", 0) == 0);
  CHECK(count_lines(summary) == 2);
}

TEST_CASE("cell lists parse or fail loudly") {
  auto cells = parse_cell_list("0,1;2,3");
  REQUIRE(cells.size() == 2);
  CHECK(cells[0] == std::pair<int, int>(0, 1));
  CHECK(cells[1] == std::pair<int, int>(2, 3));
  CHECK(parse_cell_list("2,2").size() == 1);

  CHECK_THROWS_WITH_AS(parse_cell_list("junk"),
                       "bad cell 'junk' (want i,j;i,j)", ConfigError);
  CHECK_THROWS_WITH_AS(parse_cell_list("1;2,3"),
                       "bad cell '1' (want i,j;i,j)", ConfigError);
  CHECK_THROWS_WITH_AS(parse_cell_list(""), "empty cell list", ConfigError);
}
