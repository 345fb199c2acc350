#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dse/reinforce.hpp"
#include "dse/sac.hpp"

namespace dse {

/// Full experiment description, one struct per run. Serialized as flat
/// `key = value` text grouped under `[section]` headers; every field has a
/// key, unknown keys are rejected, and parse(serialize(c)) == c.
struct ExperimentConfig {
  // [run]
  std::string algorithm;  // required; see algorithm helpers below
  std::string family = "cartpole3x3";
  std::string mask = "full";
  std::int64_t seed = 0;
  double gamma = 0.99;
  std::int64_t iterations = 5000;
  std::string output_dir = "run";
  std::int64_t threads = 1;
  std::int64_t metrics_every = 1;

  // [policy]
  std::vector<int> policy_hidden = {32};
  std::string activation = "tanh";
  std::string input_mode = "concat-outer";
  std::int64_t z_dim = 2;
  std::int64_t g_dim = 2;
  std::string latent_cadence = "per-step";

  // [reinforce]
  double rf_alpha_d = 50000.0;
  double rf_alpha_r = 1000.0;
  double rf_alpha_pi = std::numeric_limits<double>::infinity();
  std::int64_t rf_batch = 4;
  double rf_lr = 0.002;
  double rf_lr_emb = 0.002;
  std::string rf_optimizer = "adam";
  bool rf_popart = true;
  double rf_beta_art = 0.02;
  std::int64_t rf_h_cutoff = 0;  // 0 = round(1/(1-gamma))
  std::string rf_h_mode = "truncated-only";

  // [sac]
  double sac_alpha_pi = 250.0;
  double sac_alpha_d = 20.0;
  double sac_alpha_r = 20.0;
  double sac_tau = 0.01;
  std::int64_t sac_batch = 128;
  double sac_lr_policy = 0.003;
  double sac_lr_emb = 0.0003;
  double sac_lr_q = 0.03;
  double sac_lr_v = 0.03;
  std::int64_t sac_replay_capacity = 3000000;
  std::int64_t sac_warmup = 1000;
  std::vector<int> sac_critic_hidden = {100};
  std::string sac_optimizer = "adam";

  // [stop] — optional early stopping and evaluation cadence
  bool early_stop = false;
  double target_return = 0.0;    // stop when rolling mean return >= this
  double target_distance = 0.0;  // stop when eval final distance < this
  std::int64_t stop_window = 20;
  std::int64_t eval_every = 100;
  std::int64_t eval_episodes = 10;

  // [hrl]
  std::string hrl_env = "asteroid-cartpole";  // or "reacher-circle"
  std::string hrl_low_checkpoint;
  std::int64_t hrl_interval = 10;
  std::int64_t hrl_n_asteroids = 1;
  std::int64_t hrl_asteroid_type = 1;
  std::string hrl_extra_g_points = "-0.1,-1.30;0.35,0.65";
  double hrl_g_box_sigma = 3.0;
  double hrl_circle_radius = 0.12;
  std::int64_t hrl_circle_period = 180;
  std::int64_t hrl_max_steps = 180;
  std::int64_t hrl_deploy_i = 1;
  bool hrl_stochastic_low = false;
};

/// Parse config text / a config file. Throws ConfigError on unknown
/// sections or keys, malformed lines, bad values, or a missing algorithm.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

std::string serialize_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// -- algorithm helpers -------------------------------------------------------
// Accepted values: dse-reinforce, dse-sac, single-embedding-reinforce,
// single-embedding-sac, independent (alias of independent-reinforce),
// independent-reinforce, independent-sac, hrl-reinforce, hrl-sac,
// flat-reinforce, flat-sac.
bool algorithm_is_sac(const std::string& a);
bool algorithm_is_hrl(const std::string& a);
bool algorithm_is_flat(const std::string& a);          // flat HRL baselines
bool algorithm_is_independent(const std::string& a);   // per-cell learners
LatentMode algorithm_latent_mode(const std::string& a);

/// Settings conversions (latent mode/cadence/seed/threads filled from cfg).
ReinforceSettings to_reinforce_settings(const ExperimentConfig& cfg);
SacSettings to_sac_settings(const ExperimentConfig& cfg);

/// Comma-separated doubles ("0.1,-0.5"); throws ConfigError on junk.
std::vector<double> parse_double_list(const std::string& text);
/// Semicolon-separated vectors of comma-separated doubles.
std::vector<std::vector<double>> parse_point_list(const std::string& text);

}  // namespace dse
