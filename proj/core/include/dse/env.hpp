#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dse {

struct StepResult {
  double reward = 0.0;
  bool done = false;
  /// done purely because the step cap was hit (no failure state reached).
  /// Value targets bootstrap through truncated ends but not terminal ones.
  bool truncated = false;
};

/// Episode-seeded environment. All randomness (initial state, mid-episode
/// spawns) derives from the seed passed to reset(), so an episode is a pure
/// function of (seed, action sequence).
class Env {
 public:
  virtual ~Env() = default;

  virtual int obs_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int num_actions() const { return 0; }  // discrete envs
  virtual int action_dim() const { return 0; }   // continuous envs
  virtual int max_steps() const = 0;

  virtual void reset(uint64_t seed) = 0;
  virtual void observe(std::span<double> out) const = 0;
  std::vector<double> observation() const {
    std::vector<double> out(obs_dim());
    observe(out);
    return out;
  }

  virtual StepResult step(int action);
  virtual StepResult step(std::span<const double> action);

 protected:
  [[noreturn]] static void wrong_action_kind();
};

/// One off-policy transition; (i, j) is implied by the buffer holding it.
struct Transition {
  std::vector<double> s;
  std::vector<double> a;  // squashed (post-tanh) action
  double reward = 0.0;
  std::vector<double> s_next;
  bool done = false;
  bool truncated = false;
};

/// One on-policy episode for a grid cell. Continuous actions are stored
/// presquash (u with a = tanh(u)) so behavior log-probabilities can be
/// rebuilt exactly; latent draws are stored as standard-normal noise.
struct Trajectory {
  int i = 0;
  int j = 0;
  std::vector<std::vector<double>> states;
  std::vector<int> actions_d;
  std::vector<std::vector<double>> actions_c;
  std::vector<double> rewards;
  std::vector<double> log_probs;  // behavior log pi(a_t|s_t,z_t,g_t) at collection
  std::vector<std::vector<double>> z_noise;  // per step, or single entry per episode
  std::vector<std::vector<double>> g_noise;
  bool terminated = false;  // reached a failure state (not the step cap)

  size_t length() const { return rewards.size(); }
};

}  // namespace dse
