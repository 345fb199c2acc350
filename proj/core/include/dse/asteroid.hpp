#pragma once

#include <random>
#include <vector>

#include "dse/cartpole.hpp"
#include "dse/env.hpp"

namespace dse {

inline constexpr double kAsteroidHeight = 2.0;
inline constexpr double kAsteroidFallSpeed = 0.5;  // m/s -> 0.01 m per step
inline constexpr double kAsteroidCollideX = 0.3;
inline constexpr double kAsteroidCollideY = 0.15;
inline constexpr int kAsteroidMaxSteps = 2000;

struct Asteroid {
  double x = 0.0;
  double y = kAsteroidHeight;
  int type = 1;  // 1: respawn at uniform random x; 2: respawn above the cart
};

struct AsteroidState {
  CartpoleState cartpole;
  std::vector<Asteroid> asteroids;
};

/// Survival cartpole (cart mass fixed at 1.0) with falling obstacles.
/// Reward +1 per step survived; a step causing pole/track failure or an
/// asteroid collision ends the episode with reward 0. Asteroids fall at
/// constant speed and respawn at the top; initial heights are staggered so
/// multiple asteroids arrive out of phase. Observation: cartpole state plus,
/// per asteroid, (x_ast - x_cart, y_ast).
class AsteroidCartpoleEnv : public Env {
 public:
  AsteroidCartpoleEnv(int n_asteroids, int asteroid_type,
                      int max_steps = kAsteroidMaxSteps);

  int obs_dim() const override { return 4 + 2 * static_cast<int>(n_asteroids_); }
  bool discrete_actions() const override { return true; }
  int num_actions() const override { return 2; }
  int max_steps() const override { return max_steps_; }

  void reset(uint64_t seed) override;
  void observe(std::span<double> out) const override;
  using Env::step;
  StepResult step(int action) override;

  const AsteroidState& state() const { return state_; }
  int steps() const { return steps_; }

 private:
  void spawn(Asteroid& a, double y);

  size_t n_asteroids_;
  int asteroid_type_;
  int max_steps_;
  AsteroidState state_;
  std::mt19937_64 rng_;
  int steps_ = 0;
};

}  // namespace dse
