#include "dse/reacher.hpp"

#include <algorithm>
#include <cmath>

namespace dse {
namespace {
constexpr double kPi = 3.14159265358979323846;
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

std::array<double, 2> reacher_tip(const ReacherState& s, double l1, double l2) {
  return {l1 * std::cos(s.q1) + l2 * std::cos(s.q1 + s.q2),
          l1 * std::sin(s.q1) + l2 * std::sin(s.q1 + s.q2)};
}

ReacherState reacher_physics_step(const ReacherState& s, double t1, double t2) {
  t1 = std::clamp(t1, -1.0, 1.0);
  t2 = std::clamp(t2, -1.0, 1.0);
  ReacherState n;
  n.q1 = wrap_angle(s.q1 + kReacherDt * s.q1_dot);
  n.q2 = wrap_angle(s.q2 + kReacherDt * s.q2_dot);
  n.q1_dot = s.q1_dot + kReacherDt * (kReacherGain * t1 - kReacherDamping * s.q1_dot);
  n.q2_dot = s.q2_dot + kReacherDt * (kReacherGain * t2 - kReacherDamping * s.q2_dot);
  return n;
}

double reacher_reward(const ReacherState& s, double l1, double l2,
                      double goal_x, double goal_y, double t1, double t2) {
  t1 = std::clamp(t1, -1.0, 1.0);
  t2 = std::clamp(t2, -1.0, 1.0);
  auto tip = reacher_tip(s, l1, l2);
  double dist = std::hypot(tip[0] - goal_x, tip[1] - goal_y);
  double r = -dist - kReacherTorqueCost * (t1 * t1 + t2 * t2);
  if (dist < kReacherBonusRadius) r += 1.0;
  return r;
}

void ReacherEnv::reset(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  state_.q1 = u(rng);
  state_.q2 = u(rng);
  state_.q1_dot = 0.0;
  state_.q2_dot = 0.0;
  steps_ = 0;
}

void ReacherEnv::observe(std::span<double> out) const {
  auto t = tip();
  out[0] = std::cos(state_.q1);
  out[1] = std::sin(state_.q1);
  out[2] = std::cos(state_.q2);
  out[3] = std::sin(state_.q2);
  out[4] = state_.q1_dot;
  out[5] = state_.q2_dot;
  out[6] = t[0];
  out[7] = t[1];
}

double ReacherEnv::distance_to_goal() const {
  auto t = tip();
  return std::hypot(t[0] - goal_x_, t[1] - goal_y_);
}

StepResult ReacherEnv::step(std::span<const double> action) {
  state_ = reacher_physics_step(state_, action[0], action[1]);
  ++steps_;
  StepResult r;
  r.reward = reacher_reward(state_, l1_, l2_, goal_x_, goal_y_, action[0], action[1]);
  r.done = steps_ >= max_steps_;
  r.truncated = r.done;
  return r;
}

}  // namespace dse
