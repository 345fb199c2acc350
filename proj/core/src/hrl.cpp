#include "dse/hrl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dse/errors.hpp"
#include "dse/heads.hpp"
#include "dse/rng.hpp"

namespace dse {

MovingGoalReacherEnv::MovingGoalReacherEnv(double link1, double link2,
                                           double radius, int period,
                                           int max_steps)
    : inner_(link1, link2, radius, 0.0, max_steps),
      radius_(radius),
      period_(period),
      max_steps_(max_steps) {
  if (radius <= 0.0) throw ConfigError("goal circle radius must be positive");
  if (period < 1) throw ConfigError("goal circle period must be >= 1");
  if (max_steps < 1) throw ConfigError("episode length must be >= 1");
}

void MovingGoalReacherEnv::place_goal() {
  const double phase =
      2.0 * std::numbers::pi * static_cast<double>(steps_) / period_;
  inner_.set_goal(radius_ * std::cos(phase), radius_ * std::sin(phase));
}

void MovingGoalReacherEnv::reset(uint64_t seed) {
  inner_.reset(seed);
  steps_ = 0;
  dist_sum_ = 0.0;
  place_goal();
}

void MovingGoalReacherEnv::observe(std::span<double> out) const {
  inner_.observe(out.subspan(0, 8));
  out[8] = inner_.goal_x();
  out[9] = inner_.goal_y();
  out[10] = inner_.distance_to_goal();
}

StepResult MovingGoalReacherEnv::step(std::span<const double> action) {
  StepResult r = inner_.step(action);
  dist_sum_ += inner_.distance_to_goal();
  ++steps_;
  const bool done = steps_ >= max_steps_;
  if (!done) place_goal();  // keep the reward's goal in step with time
  return {r.reward, done, done};
}

OptionEnv::OptionEnv(std::unique_ptr<Env> base, OptionSpec spec)
    : base_(std::move(base)), spec_(std::move(spec)) {
  if (base_ == nullptr) throw ConfigError("option environment needs a base env");
  if (spec_.interval < 1) throw ConfigError("decision interval must be >= 1");
  if (base_->obs_dim() < spec_.low_policy.s_dim)
    throw ConfigError("base observation narrower than the low-level policy input");
  if (static_cast<int>(spec_.z.size()) != spec_.low_policy.z_dim)
    throw ConfigError("frozen dynamics latent does not match the policy's z dim");
  const int gd = spec_.low_policy.g_dim;
  if (!spec_.g_points.empty()) {
    for (const auto& p : spec_.g_points)
      if (static_cast<int>(p.size()) != gd)
        throw ConfigError("goal-latent point does not match the policy's g dim");
    if (!spec_.g_lo.empty() || !spec_.g_hi.empty())
      throw ConfigError("choose either a goal-point menu or a goal box, not both");
  } else {
    if (static_cast<int>(spec_.g_lo.size()) != gd ||
        static_cast<int>(spec_.g_hi.size()) != gd)
      throw ConfigError("goal box bounds do not match the policy's g dim");
    for (int k = 0; k < gd; ++k)
      if (!(spec_.g_lo[k] < spec_.g_hi[k]))
        throw ConfigError("goal box must have lo < hi in every dimension");
  }
  max_options_ = (base_->max_steps() + spec_.interval - 1) / spec_.interval;
  low_obs_.resize(spec_.low_policy.s_dim);
}

void OptionEnv::reset(uint64_t seed) {
  base_->reset(seed);
  rng_.seed(splitmix64(seed ^ 0x9e3779b97f4a7c15ULL));
  base_steps_ = 0;
  base_done_ = false;
}

void OptionEnv::observe(std::span<double> out) const { base_->observe(out); }

StepResult OptionEnv::step(int action) {
  if (spec_.g_points.empty()) wrong_action_kind();
  if (action < 0 || action >= static_cast<int>(spec_.g_points.size()))
    throw ConfigError("goal-point index out of range");
  return run_option(spec_.g_points[static_cast<std::size_t>(action)]);
}

StepResult OptionEnv::step(std::span<const double> action) {
  if (!spec_.g_points.empty()) wrong_action_kind();
  const std::size_t gd = spec_.g_lo.size();
  if (action.size() != gd)
    throw ConfigError("goal-latent action has the wrong dimension");
  std::vector<double> g(gd);
  for (std::size_t k = 0; k < gd; ++k) {
    const double unit = 0.5 * (action[k] + 1.0);  // [-1, 1] -> [0, 1]
    g[k] = spec_.g_lo[k] + unit * (spec_.g_hi[k] - spec_.g_lo[k]);
  }
  return run_option(g);
}

StepResult OptionEnv::run_option(std::span<const double> g) {
  const Policy& low = spec_.low_policy;
  const int sdim = low.s_dim;
  const int adim = low.act_dim;
  double total = 0.0;
  StepResult last{};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < spec_.interval && !base_done_; ++k) {
    auto obs = base_->observation();
    std::copy_n(obs.begin(), sdim, low_obs_.begin());
    build_policy_input(low, low_obs_, spec_.z, g, input_);
    auto out = scratch_.forward(low.mlp, low.params, input_);
    if (low.discrete) {
      int a;
      if (spec_.stochastic_low) {
        a = sample_categorical(out, rng_);
      } else {
        a = 0;
        for (int c = 1; c < low.act_dim; ++c)
          if (out[c] > out[a]) a = c;
      }
      last = base_->step(a);
    } else {
      std::vector<double> act(adim);
      if (spec_.stochastic_low) {
        std::vector<double> noise(adim);
        for (double& n : noise) n = normal(rng_);
        auto ga = gaussian_tanh_head(out.subspan(0, adim),
                                     out.subspan(adim, adim), noise);
        act = ga.action;
      } else {
        for (int c = 0; c < adim; ++c) act[c] = std::tanh(out[c]);
      }
      last = base_->step(std::span<const double>(act));
    }
    total += last.reward;
    ++base_steps_;
    base_done_ = last.done;
  }
  return {total, last.done, last.truncated};
}

}  // namespace dse
