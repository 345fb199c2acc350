#pragma once

#include <random>

#include "dse/env.hpp"

namespace dse {

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
};

inline constexpr double kCartpoleDt = 0.02;
inline constexpr double kCartpoleGravity = 9.8;
inline constexpr double kCartpoleMassPole = 0.1;
inline constexpr double kCartpoleHalfLength = 0.5;
inline constexpr double kCartpoleForce = 10.0;
inline constexpr double kCartpoleXLimit = 2.4;
inline constexpr double kCartpoleThetaLimit = 12.0 * 3.14159265358979323846 / 180.0;
inline constexpr int kCartpoleMaxSteps = 300;

/// One explicit-Euler step of the classic cartpole ODE with a configurable
/// cart mass. action 1 pushes right (+10 N), action 0 pushes left.
CartpoleState cartpole_physics_step(const CartpoleState& s, int action,
                                    double mass_cart);

bool cartpole_failed(const CartpoleState& s);

/// Pole-tip x-coordinate: cart position plus full pole length times sin(theta).
double cartpole_tip_x(const CartpoleState& s);

/// Dense goal-tracking reward in [0,1]: linear falloff of tip distance to the
/// goal over the track half-width; 0 in failure states.
double cartpole_reward(const CartpoleState& s, double x_goal);

class CartpoleEnv : public Env {
 public:
  CartpoleEnv(double mass_cart, double x_goal)
      : mass_cart_(mass_cart), x_goal_(x_goal) {}

  int obs_dim() const override { return 4; }
  bool discrete_actions() const override { return true; }
  int num_actions() const override { return 2; }
  int max_steps() const override { return kCartpoleMaxSteps; }

  void reset(uint64_t seed) override;
  void observe(std::span<double> out) const override;
  using Env::step;
  StepResult step(int action) override;

  const CartpoleState& state() const { return state_; }
  double x_goal() const { return x_goal_; }
  int steps() const { return steps_; }

 private:
  double mass_cart_;
  double x_goal_;
  CartpoleState state_;
  int steps_ = 0;
};

}  // namespace dse
