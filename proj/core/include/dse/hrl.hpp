#pragma once

#include <memory>
#include <vector>

#include "dse/env.hpp"
#include "dse/policy.hpp"
#include "dse/reacher.hpp"

namespace dse {

/// Two-link reacher whose goal travels a circle of the given radius,
/// advancing by one period-th of a revolution per step. Observations are the
/// base reacher's 8 features plus the goal location (2) and the tip-to-goal
/// distance (1), 11 dims total; the first 8 match what a multi-task reacher
/// policy was trained on. Episodes are time-limit only.
class MovingGoalReacherEnv final : public Env {
 public:
  MovingGoalReacherEnv(double link1, double link2, double radius, int period,
                       int max_steps);

  int obs_dim() const override { return 11; }
  bool discrete_actions() const override { return false; }
  int action_dim() const override { return 2; }
  int max_steps() const override { return max_steps_; }
  void reset(uint64_t seed) override;
  void observe(std::span<double> out) const override;
  using Env::step;
  StepResult step(std::span<const double> action) override;

  double distance_to_goal() const { return inner_.distance_to_goal(); }
  /// Mean tip-to-goal distance over the steps taken so far this episode.
  double mean_distance() const {
    return steps_ == 0 ? inner_.distance_to_goal()
                       : dist_sum_ / static_cast<double>(steps_);
  }

 private:
  void place_goal();

  ReacherEnv inner_;
  double radius_;
  int period_;
  int max_steps_;
  int steps_ = 0;
  double dist_sum_ = 0.0;
};

/// Option execution settings: a frozen low-level policy, the frozen dynamics
/// latent, and either a discrete menu of goal-latent points or a continuous
/// goal-latent box. The low-level policy reads the first `low_policy.s_dim`
/// entries of the base observation (extra high-level features are appended
/// after them by construction).
struct OptionSpec {
  Policy low_policy;
  std::vector<double> z;
  std::vector<std::vector<double>> g_points;  // discrete menu; empty = box mode
  std::vector<double> g_lo, g_hi;             // box mode bounds
  int interval = 10;
  bool stochastic_low = false;  // sample the low policy instead of acting greedily
};

/// Environment over options: each high-level step picks a goal-latent point
/// (by index in discrete mode; as a tanh-squashed vector mapped into
/// [g_lo, g_hi] in box mode) and runs the frozen low-level policy for
/// `interval` base steps, summing the base rewards.
class OptionEnv final : public Env {
 public:
  OptionEnv(std::unique_ptr<Env> base, OptionSpec spec);

  int obs_dim() const override { return base_->obs_dim(); }
  bool discrete_actions() const override { return !spec_.g_points.empty(); }
  int num_actions() const override {
    return static_cast<int>(spec_.g_points.size());
  }
  int action_dim() const override {
    return static_cast<int>(spec_.g_lo.size());
  }
  int max_steps() const override { return max_options_; }
  void reset(uint64_t seed) override;
  void observe(std::span<double> out) const override;
  StepResult step(int action) override;
  StepResult step(std::span<const double> action) override;

  Env& base() { return *base_; }
  const Env& base() const { return *base_; }

 private:
  StepResult run_option(std::span<const double> g);

  std::unique_ptr<Env> base_;
  OptionSpec spec_;
  int max_options_ = 0;
  int base_steps_ = 0;
  bool base_done_ = false;
  std::mt19937_64 rng_;  // low-level action noise in stochastic mode
  mutable MlpScratch scratch_;
  std::vector<double> low_obs_, input_;
};

}  // namespace dse
