#include "dse/asteroid.hpp"

#include <cmath>

#include "dse/errors.hpp"

namespace dse {

AsteroidCartpoleEnv::AsteroidCartpoleEnv(int n_asteroids, int asteroid_type,
                                         int max_steps)
    : n_asteroids_(static_cast<size_t>(n_asteroids)),
      asteroid_type_(asteroid_type),
      max_steps_(max_steps) {
  if (n_asteroids < 0) throw ConfigError("n_asteroids must be >= 0");
  if (asteroid_type != 1 && asteroid_type != 2) {
    throw ConfigError("asteroid type must be 1 or 2");
  }
}

void AsteroidCartpoleEnv::spawn(Asteroid& a, double y) {
  a.y = y;
  a.type = asteroid_type_;
  if (asteroid_type_ == 1) {
    a.x = std::uniform_real_distribution<double>(-kCartpoleXLimit,
                                                 kCartpoleXLimit)(rng_);
  } else {
    a.x = state_.cartpole.x;
  }
}

void AsteroidCartpoleEnv::reset(uint64_t seed) {
  rng_ = std::mt19937_64(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  state_.cartpole.x = u(rng_);
  state_.cartpole.x_dot = u(rng_);
  state_.cartpole.theta = u(rng_);
  state_.cartpole.theta_dot = u(rng_);
  state_.asteroids.resize(n_asteroids_);
  // Stagger start heights so asteroids arrive out of phase: k-th starts at
  // height * (k+1) / n.
  for (size_t k = 0; k < n_asteroids_; ++k) {
    double frac = static_cast<double>(k + 1) / static_cast<double>(n_asteroids_);
    spawn(state_.asteroids[k], kAsteroidHeight * frac);
  }
  steps_ = 0;
}

void AsteroidCartpoleEnv::observe(std::span<double> out) const {
  out[0] = state_.cartpole.x;
  out[1] = state_.cartpole.x_dot;
  out[2] = state_.cartpole.theta;
  out[3] = state_.cartpole.theta_dot;
  for (size_t k = 0; k < n_asteroids_; ++k) {
    out[4 + 2 * k] = state_.asteroids[k].x - state_.cartpole.x;
    out[5 + 2 * k] = state_.asteroids[k].y;
  }
}

StepResult AsteroidCartpoleEnv::step(int action) {
  state_.cartpole = cartpole_physics_step(state_.cartpole, action, 1.0);
  const double dy = kAsteroidFallSpeed * kCartpoleDt;
  bool collided = false;
  for (Asteroid& a : state_.asteroids) {
    a.y -= dy;
    if (a.y < kAsteroidCollideY &&
        std::abs(a.x - state_.cartpole.x) < kAsteroidCollideX) {
      collided = true;
    }
    if (a.y <= 0.0) spawn(a, kAsteroidHeight);
  }
  ++steps_;
  bool failed = cartpole_failed(state_.cartpole) || collided;
  bool capped = steps_ >= max_steps_;
  StepResult r;
  r.reward = failed ? 0.0 : 1.0;
  r.done = failed || capped;
  r.truncated = capped && !failed;
  return r;
}

}  // namespace dse
