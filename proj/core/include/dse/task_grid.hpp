#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dse/env.hpp"

namespace dse {

/// An I x J grid of tasks sharing state/action spaces: row i picks the
/// dynamics parameters, column j picks the goal parameters. train_mask marks
/// the cells used during multi-task training; held-out cells drive the
/// retraining experiments.
struct TaskGrid {
  std::string family;  // cartpole3x3 | reacher3x3 | reacher2x4
  std::vector<std::vector<double>> dynamics_params;
  std::vector<std::vector<double>> goal_params;
  std::vector<std::vector<bool>> train_mask;

  int rows() const { return static_cast<int>(dynamics_params.size()); }
  int cols() const { return static_cast<int>(goal_params.size()); }
  bool trained(int i, int j) const { return train_mask[i][j]; }
  int trained_count() const;
  std::vector<std::pair<int, int>> trained_cells() const;
  std::vector<std::pair<int, int>> heldout_cells() const;
};

/// mask: "full" trains every cell; "six-three" holds out the diagonal of a
/// 3x3 grid; "four-five" trains only cells {(0,2),(1,2),(2,0),(2,1)} of a
/// 3x3 grid. Unknown family or mask, or a mask applied to a grid of the
/// wrong shape, is a configuration error.
TaskGrid build_task_grid(const std::string& family, const std::string& mask);

std::unique_ptr<Env> make_env(const TaskGrid& grid, int i, int j);

/// Env with explicit parameters, for off-grid conditions (unseen-cell fits).
std::unique_ptr<Env> make_env_params(const std::string& family,
                                     const std::vector<double>& dynamics_params,
                                     const std::vector<double>& goal_params);

}  // namespace dse
