#include "dse/cartpole.hpp"

#include <cmath>

namespace dse {

CartpoleState cartpole_physics_step(const CartpoleState& s, int action,
                                    double mass_cart) {
  const double force = action == 1 ? kCartpoleForce : -kCartpoleForce;
  const double total_mass = mass_cart + kCartpoleMassPole;
  const double polemass_length = kCartpoleMassPole * kCartpoleHalfLength;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);

  const double temp =
      (force + polemass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (kCartpoleGravity * sin_t - cos_t * temp) /
      (kCartpoleHalfLength *
       (4.0 / 3.0 - kCartpoleMassPole * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  CartpoleState n;
  n.x = s.x + kCartpoleDt * s.x_dot;
  n.x_dot = s.x_dot + kCartpoleDt * x_acc;
  n.theta = s.theta + kCartpoleDt * s.theta_dot;
  n.theta_dot = s.theta_dot + kCartpoleDt * theta_acc;
  return n;
}

bool cartpole_failed(const CartpoleState& s) {
  return std::abs(s.x) > kCartpoleXLimit || std::abs(s.theta) > kCartpoleThetaLimit;
}

double cartpole_tip_x(const CartpoleState& s) {
  return s.x + 2.0 * kCartpoleHalfLength * std::sin(s.theta);
}

double cartpole_reward(const CartpoleState& s, double x_goal) {
  if (cartpole_failed(s)) return 0.0;
  double r = 1.0 - std::abs(cartpole_tip_x(s) - x_goal) / kCartpoleXLimit;
  return r > 0.0 ? r : 0.0;
}

void CartpoleEnv::reset(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  state_.x = u(rng);
  state_.x_dot = u(rng);
  state_.theta = u(rng);
  state_.theta_dot = u(rng);
  steps_ = 0;
}

void CartpoleEnv::observe(std::span<double> out) const {
  out[0] = state_.x;
  out[1] = state_.x_dot;
  out[2] = state_.theta;
  out[3] = state_.theta_dot;
}

StepResult CartpoleEnv::step(int action) {
  state_ = cartpole_physics_step(state_, action, mass_cart_);
  ++steps_;
  StepResult r;
  r.reward = cartpole_reward(state_, x_goal_);
  bool failed = cartpole_failed(state_);
  bool capped = steps_ >= kCartpoleMaxSteps;
  r.done = failed || capped;
  r.truncated = capped && !failed;
  return r;
}

}  // namespace dse
