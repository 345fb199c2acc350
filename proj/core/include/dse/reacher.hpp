#pragma once

#include <array>
#include <random>

#include "dse/env.hpp"

namespace dse {

inline constexpr double kReacherDt = 0.05;
inline constexpr double kReacherGain = 1.0;
inline constexpr double kReacherDamping = 1.0;
inline constexpr int kReacherMaxSteps = 100;
inline constexpr double kReacherBonusRadius = 0.02;
inline constexpr double kReacherTorqueCost = 0.01;

struct ReacherState {
  double q1 = 0.0, q2 = 0.0;        // joint angles, wrapped to (-pi, pi]
  double q1_dot = 0.0, q2_dot = 0.0;
};

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Fingertip position of the two-link arm.
std::array<double, 2> reacher_tip(const ReacherState& s, double l1, double l2);

/// One explicit-Euler step of the damped double-integrator joints:
/// q_ddot = gain * torque - damping * q_dot. Torques are clipped to [-1,1].
ReacherState reacher_physics_step(const ReacherState& s, double t1, double t2);

/// r = -|tip - goal| - 0.01 * |torque|^2 + 1 if strictly within the bonus
/// radius of the goal.
double reacher_reward(const ReacherState& s, double l1, double l2,
                      double goal_x, double goal_y, double t1, double t2);

/// Two-link planar arm chasing a hidden goal point. The observation excludes
/// the goal: (cos q1, sin q1, cos q2, sin q2, q1_dot, q2_dot, tip_x, tip_y).
/// Episodes always run to the step cap (pure time limit, no failure states).
class ReacherEnv : public Env {
 public:
  ReacherEnv(double l1, double l2, double goal_x, double goal_y,
             int max_steps = kReacherMaxSteps)
      : l1_(l1), l2_(l2), goal_x_(goal_x), goal_y_(goal_y),
        max_steps_(max_steps) {}

  int obs_dim() const override { return 8; }
  bool discrete_actions() const override { return false; }
  int action_dim() const override { return 2; }
  int max_steps() const override { return max_steps_; }

  void reset(uint64_t seed) override;
  void observe(std::span<double> out) const override;
  using Env::step;
  StepResult step(std::span<const double> action) override;

  const ReacherState& state() const { return state_; }
  std::array<double, 2> tip() const { return reacher_tip(state_, l1_, l2_); }
  double distance_to_goal() const;
  void set_goal(double gx, double gy) { goal_x_ = gx; goal_y_ = gy; }
  double goal_x() const { return goal_x_; }
  double goal_y() const { return goal_y_; }
  int steps() const { return steps_; }

 private:
  double l1_, l2_;
  double goal_x_, goal_y_;
  int max_steps_;
  ReacherState state_;
  int steps_ = 0;
};

}  // namespace dse
