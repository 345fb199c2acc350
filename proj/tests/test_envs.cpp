#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "dse/asteroid.hpp"
#include "dse/cartpole.hpp"
#include "dse/env.hpp"
#include "dse/errors.hpp"
#include "dse/reacher.hpp"

using namespace dse;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent re-derivation of the cartpole ODE (force + Euler with the
// pre-step velocities), written separately from the production code.
CartpoleState oracle_cartpole(const CartpoleState& s, int action, double mc) {
  double force = action == 1 ? 10.0 : -10.0;
  double mp = 0.1, hl = 0.5, g = 9.8, dt = 0.02;
  double total = mc + mp;
  double pml = mp * hl;
  double sin_t = std::sin(s.theta), cos_t = std::cos(s.theta);
  double temp = (force + pml * s.theta_dot * s.theta_dot * sin_t) / total;
  double theta_acc = (g * sin_t - cos_t * temp) /
                     (hl * (4.0 / 3.0 - mp * cos_t * cos_t / total));
  double x_acc = temp - pml * theta_acc * cos_t / total;
  CartpoleState n;
  n.x = s.x + dt * s.x_dot;
  n.x_dot = s.x_dot + dt * x_acc;
  n.theta = s.theta + dt * s.theta_dot;
  n.theta_dot = s.theta_dot + dt * theta_acc;
  return n;
}

// Stabilizing bang-bang controller (PD on angle with a weak position term).
int balance_action(std::span<const double> obs) {
  return (12.0 * obs[2] + obs[3] + 0.3 * obs[0] + 0.5 * obs[1]) > 0 ? 1 : 0;
}

}  // namespace

TEST_CASE("cartpole: physics matches an independent oracle") {
  std::vector<CartpoleState> states{
      {0.0, 0.0, 0.0, 0.0},
      {0.1, -0.2, 0.05, 0.3},
      {-1.5, 1.0, -0.15, -2.0},
      {2.0, -3.0, 0.2, 4.0},
  };
  for (double mc : {0.2, 1.0, 2.0}) {
    for (const auto& s : states) {
      for (int a : {0, 1}) {
        auto got = cartpole_physics_step(s, a, mc);
        auto want = oracle_cartpole(s, a, mc);
        CHECK(got.x == doctest::Approx(want.x).epsilon(1e-12));
        CHECK(got.x_dot == doctest::Approx(want.x_dot).epsilon(1e-12));
        CHECK(got.theta == doctest::Approx(want.theta).epsilon(1e-12));
        CHECK(got.theta_dot == doctest::Approx(want.theta_dot).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("cartpole: tip position, failure predicate, reward") {
  CartpoleState s{0.5, 0.0, 0.0, 0.0};
  CHECK(cartpole_tip_x(s) == doctest::Approx(0.5));
  s.theta = kPi / 2.0;
  CHECK(cartpole_tip_x(s) == doctest::Approx(1.5));  // plus a full pole length

  CHECK(!cartpole_failed({2.4, 0, 0, 0}));
  CHECK(cartpole_failed({2.41, 0, 0, 0}));
  CHECK(cartpole_failed({-2.41, 0, 0, 0}));
  CHECK(!cartpole_failed({0, 0, 0.20, 0}));   // 12 deg = 0.2094 rad
  CHECK(cartpole_failed({0, 0, 0.21, 0}));
  CHECK(cartpole_failed({0, 0, -0.21, 0}));

  // Linear falloff over the track half-width: tip 0.5, goal -1 -> 0.375.
  CHECK(cartpole_reward({0.5, 0, 0, 0}, -1.0) == doctest::Approx(0.375));
  CHECK(cartpole_reward({0.0, 0, 0, 0}, 0.0) == doctest::Approx(1.0));
  // Clamped at zero once the tip is more than 2.4 from the goal.
  CHECK(cartpole_reward({1.5, 0, 0, 0}, -1.0) == doctest::Approx(0.0));
  // Failure states pay nothing even if the tip is close.
  CHECK(cartpole_reward({0.0, 0, 0.21, 0}, 0.0) == 0.0);
}

TEST_CASE("cartpole env: reset is seeded and bounded") {
  CartpoleEnv env(1.0, 0.0);
  env.reset(77);
  auto a = env.observation();
  for (double v : a) CHECK(std::abs(v) <= 0.05);
  env.reset(77);
  CHECK(env.observation() == a);
  env.reset(78);
  CHECK(env.observation() != a);
  CHECK(env.steps() == 0);
}

TEST_CASE("cartpole env: step applies physics then pays at the new state") {
  CartpoleEnv env(0.2, 1.0);
  env.reset(3);
  CartpoleState before = env.state();
  auto r = env.step(1);
  auto want = cartpole_physics_step(before, 1, 0.2);
  CHECK(env.state().x == doctest::Approx(want.x).epsilon(1e-15));
  CHECK(env.state().theta_dot == doctest::Approx(want.theta_dot).epsilon(1e-15));
  CHECK(r.reward == doctest::Approx(cartpole_reward(want, 1.0)));
  CHECK(!r.done);
  CHECK(!r.truncated);
  CHECK(env.steps() == 1);
}

TEST_CASE("cartpole env: pole falls -> terminal, not truncated") {
  CartpoleEnv env(1.0, 0.0);
  env.reset(11);
  StepResult r;
  int t = 0;
  do {
    r = env.step(1);  // constant push destabilizes quickly
    ++t;
  } while (!r.done && t < kCartpoleMaxSteps);
  CHECK(t < kCartpoleMaxSteps);
  CHECK(r.done);
  CHECK(!r.truncated);
  CHECK(r.reward == 0.0);
}

TEST_CASE("cartpole env: surviving to the cap truncates") {
  CartpoleEnv env(1.0, 0.0);
  env.reset(4);
  StepResult r;
  for (int t = 0; t < kCartpoleMaxSteps; ++t) {
    r = env.step(balance_action(env.observation()));
    if (t + 1 < kCartpoleMaxSteps) REQUIRE(!r.done);
  }
  CHECK(r.done);
  CHECK(r.truncated);
  CHECK(r.reward > 0.0);
  CHECK(env.steps() == kCartpoleMaxSteps);
}

TEST_CASE("env base: stepping with the wrong action kind throws") {
  CartpoleEnv cart(1.0, 0.0);
  cart.reset(1);
  std::vector<double> cont{0.5};
  CHECK_THROWS_AS(cart.step(std::span<const double>(cont)), std::logic_error);
  ReacherEnv arm(0.1, 0.1, 0.1, 0.1);
  arm.reset(1);
  CHECK_THROWS_AS(arm.step(0), std::logic_error);
}

TEST_CASE("asteroid env: constructor validation") {
  CHECK_THROWS_AS(AsteroidCartpoleEnv(-1, 1), ConfigError);
  CHECK_THROWS_AS(AsteroidCartpoleEnv(1, 3), ConfigError);
  CHECK_THROWS_AS(AsteroidCartpoleEnv(1, 0), ConfigError);
  CHECK_NOTHROW(AsteroidCartpoleEnv(0, 1));
  CHECK_NOTHROW(AsteroidCartpoleEnv(3, 2));
}

TEST_CASE("asteroid env: observation layout and staggered heights") {
  AsteroidCartpoleEnv env(2, 1, 100);
  CHECK(env.obs_dim() == 8);
  env.reset(5);
  auto obs = env.observation();
  REQUIRE(obs.size() == 8);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(obs[k]) <= 0.05);
  // Heights stagger as height * (k+1) / n.
  CHECK(obs[5] == doctest::Approx(1.0));
  CHECK(obs[7] == doctest::Approx(2.0));
  // Relative x: absolute asteroid x minus cart x, within the track.
  CHECK(std::abs(obs[4] + obs[0]) <= 2.4);

  // Type 2 spawns directly above the cart.
  AsteroidCartpoleEnv above(1, 2, 100);
  above.reset(9);
  auto obs2 = above.observation();
  CHECK(obs2[4] == doctest::Approx(0.0));
  CHECK(obs2[5] == doctest::Approx(2.0));
}

TEST_CASE("asteroid env: asteroids fall at a fixed rate and respawn") {
  AsteroidCartpoleEnv env(1, 1, 400);
  env.reset(5);  // this seed spawns the asteroid far from the cart, twice
  auto obs = env.observation();
  REQUIRE(std::abs(obs[4]) > 0.6);
  double y = obs[5];
  CHECK(y == doctest::Approx(2.0));
  for (int t = 1; t <= 199; ++t) {
    auto r = env.step(balance_action(env.observation()));
    REQUIRE(!r.done);
    obs = env.observation();
    CHECK(obs[5] == doctest::Approx(y - 0.01 * t).epsilon(1e-9));
    CHECK(r.reward == 1.0);
  }
  // Step 200 drives y to zero; the asteroid respawns at the top.
  auto r = env.step(balance_action(env.observation()));
  CHECK(!r.done);
  obs = env.observation();
  CHECK(obs[5] == doctest::Approx(2.0));
  REQUIRE(std::abs(obs[4]) > 0.6);  // new spawn also far from the cart
}

TEST_CASE("asteroid env: collision ends the episode with zero reward") {
  AsteroidCartpoleEnv env(1, 2, 400);  // spawns above the cart
  env.reset(5);
  StepResult r;
  int t = 0;
  do {
    r = env.step(balance_action(env.observation()));
    ++t;
  } while (!r.done && t < 400);
  // The asteroid needs ~185 steps to descend into the collision band.
  CHECK(t >= 184);
  CHECK(t <= 187);
  CHECK(r.done);
  CHECK(!r.truncated);
  CHECK(r.reward == 0.0);
}

TEST_CASE("asteroid env: cap truncates when nothing collides") {
  AsteroidCartpoleEnv env(1, 1, 50);
  env.reset(5);
  StepResult r;
  for (int t = 0; t < 50; ++t) {
    r = env.step(balance_action(env.observation()));
    if (t < 49) REQUIRE(!r.done);
  }
  CHECK(r.done);
  CHECK(r.truncated);
  CHECK(r.reward == 1.0);
}

TEST_CASE("reacher: angle wrapping") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));  // half-open at -pi
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(2.0 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(wrap_angle(2.5 * kPi) == doctest::Approx(0.5 * kPi));
  CHECK(wrap_angle(-0.5 * kPi) == doctest::Approx(-0.5 * kPi));
  CHECK(wrap_angle(7.0) == doctest::Approx(7.0 - 2.0 * kPi));
}

TEST_CASE("reacher: forward kinematics") {
  ReacherState s;
  auto tip = reacher_tip(s, 0.1, 0.1);
  CHECK(tip[0] == doctest::Approx(0.2));
  CHECK(tip[1] == doctest::Approx(0.0));

  s.q1 = kPi / 2.0;
  tip = reacher_tip(s, 0.1, 0.1);
  CHECK(tip[0] == doctest::Approx(0.0));
  CHECK(tip[1] == doctest::Approx(0.2));

  s.q2 = kPi / 2.0;  // elbow bends relative to the first link
  tip = reacher_tip(s, 0.1, 0.1);
  CHECK(tip[0] == doctest::Approx(-0.1));
  CHECK(tip[1] == doctest::Approx(0.1));

  s.q1 = 0.3;
  s.q2 = -0.5;
  tip = reacher_tip(s, 0.2 / 3, 0.4 / 3);
  CHECK(tip[0] ==
        doctest::Approx(0.2 / 3 * std::cos(0.3) + 0.4 / 3 * std::cos(-0.2)));
  CHECK(tip[1] ==
        doctest::Approx(0.2 / 3 * std::sin(0.3) + 0.4 / 3 * std::sin(-0.2)));
}

TEST_CASE("reacher: damped joint physics and torque clipping") {
  ReacherState s{0.1, -0.2, 0.5, -1.0};
  auto n = reacher_physics_step(s, 0.3, -0.6);
  CHECK(n.q1 == doctest::Approx(0.1 + 0.05 * 0.5));  // old velocity
  CHECK(n.q2 == doctest::Approx(-0.2 + 0.05 * -1.0));
  CHECK(n.q1_dot == doctest::Approx(0.5 + 0.05 * (0.3 - 0.5)));
  CHECK(n.q2_dot == doctest::Approx(-1.0 + 0.05 * (-0.6 + 1.0)));

  // Torques beyond [-1,1] behave exactly like the saturated value.
  auto clipped = reacher_physics_step(s, 5.0, -3.0);
  auto saturated = reacher_physics_step(s, 1.0, -1.0);
  CHECK(clipped.q1_dot == saturated.q1_dot);
  CHECK(clipped.q2_dot == saturated.q2_dot);

  // Angles wrap after integration.
  ReacherState near_pi{kPi - 0.01, 0.0, 1.0, 0.0};
  auto wrapped = reacher_physics_step(near_pi, 0.0, 0.0);
  CHECK(wrapped.q1 == doctest::Approx(-kPi + 0.04));
}

TEST_CASE("reacher: reward is distance plus torque cost plus bonus") {
  ReacherState s;  // tip at (0.2, 0) with 0.1/0.1 links
  double r = reacher_reward(s, 0.1, 0.1, 0.1, 0.1, 0.5, -0.5);
  CHECK(r == doctest::Approx(-std::hypot(0.1, 0.1) - 0.01 * 0.5));
  // Within the bonus radius: +1.
  double rb = reacher_reward(s, 0.1, 0.1, 0.21, 0.0, 0.0, 0.0);
  CHECK(rb == doctest::Approx(-0.01 + 1.0));
  // Torque cost uses the clipped torques.
  CHECK(reacher_reward(s, 0.1, 0.1, 0.1, 0.1, 9.0, 0.0) ==
        doctest::Approx(reacher_reward(s, 0.1, 0.1, 0.1, 0.1, 1.0, 0.0)));
}

TEST_CASE("reacher env: reset, observation, and pure time-limit episodes") {
  ReacherEnv env(0.1, 0.1, 0.15, 0.0);
  CHECK(env.obs_dim() == 8);
  CHECK(!env.discrete_actions());
  CHECK(env.action_dim() == 2);
  CHECK(env.max_steps() == kReacherMaxSteps);

  env.reset(21);
  auto s = env.state();
  CHECK(s.q1 >= -kPi);
  CHECK(s.q1 <= kPi);
  CHECK(s.q1_dot == 0.0);
  CHECK(s.q2_dot == 0.0);
  auto obs = env.observation();
  CHECK(obs[0] == doctest::Approx(std::cos(s.q1)));
  CHECK(obs[1] == doctest::Approx(std::sin(s.q1)));
  CHECK(obs[2] == doctest::Approx(std::cos(s.q2)));
  CHECK(obs[3] == doctest::Approx(std::sin(s.q2)));
  CHECK(obs[4] == 0.0);
  CHECK(obs[5] == 0.0);
  auto tip = env.tip();
  CHECK(obs[6] == doctest::Approx(tip[0]));
  CHECK(obs[7] == doctest::Approx(tip[1]));
  CHECK(env.distance_to_goal() ==
        doctest::Approx(std::hypot(tip[0] - 0.15, tip[1])));

  env.reset(21);
  CHECK(env.observation() == obs);

  // Step: physics then reward at the new state; cap always truncates.
  ReacherState before = env.state();
  std::vector<double> act{0.4, -0.2};
  auto r = env.step(act);
  auto want = reacher_physics_step(before, 0.4, -0.2);
  CHECK(env.state().q1 == doctest::Approx(want.q1));
  CHECK(r.reward ==
        doctest::Approx(reacher_reward(want, 0.1, 0.1, 0.15, 0.0, 0.4, -0.2)));
  CHECK(!r.done);
  for (int t = 1; t < kReacherMaxSteps; ++t) {
    r = env.step(act);
    if (t + 1 < kReacherMaxSteps) REQUIRE(!r.done);
  }
  CHECK(r.done);
  CHECK(r.truncated);

  env.set_goal(1.0, 2.0);
  CHECK(env.goal_x() == 1.0);
  CHECK(env.goal_y() == 2.0);
}
