#include "dse/task_grid.hpp"

#include <cmath>

#include "dse/cartpole.hpp"
#include "dse/errors.hpp"
#include "dse/reacher.hpp"

namespace dse {
namespace {
constexpr double kPi = 3.14159265358979323846;
}

int TaskGrid::trained_count() const {
  int n = 0;
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j)
      if (train_mask[i][j]) ++n;
  return n;
}

std::vector<std::pair<int, int>> TaskGrid::trained_cells() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j)
      if (train_mask[i][j]) out.emplace_back(i, j);
  return out;
}

std::vector<std::pair<int, int>> TaskGrid::heldout_cells() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < rows(); ++i)
    for (int j = 0; j < cols(); ++j)
      if (!train_mask[i][j]) out.emplace_back(i, j);
  return out;
}

TaskGrid build_task_grid(const std::string& family, const std::string& mask) {
  TaskGrid g;
  g.family = family;
  if (family == "cartpole3x3") {
    g.dynamics_params = {{0.2}, {1.0}, {2.0}};
    g.goal_params = {{-1.0}, {0.0}, {1.0}};
  } else if (family == "reacher3x3") {
    // Link-length splits of a 0.2 m arm: 50/50, 33/67, 67/33.
    g.dynamics_params = {{0.1, 0.1}, {0.2 / 3.0, 0.4 / 3.0}, {0.4 / 3.0, 0.2 / 3.0}};
    // Goals on a 0.15 m circle at 90, 210, 330 degrees.
    g.goal_params.clear();
    for (double deg : {90.0, 210.0, 330.0}) {
      double a = deg * kPi / 180.0;
      g.goal_params.push_back({0.15 * std::cos(a), 0.15 * std::sin(a)});
    }
  } else if (family == "reacher2x4") {
    g.dynamics_params = {{0.2 / 3.0, 0.4 / 3.0}, {0.4 / 3.0, 0.2 / 3.0}};
    g.goal_params = {{0.1, 0.1}, {-0.1, 0.1}, {-0.1, -0.1}, {0.1, -0.1}};
  } else {
    throw ConfigError("unknown task family: " + family);
  }

  int rows = static_cast<int>(g.dynamics_params.size());
  int cols = static_cast<int>(g.goal_params.size());
  g.train_mask.assign(rows, std::vector<bool>(cols, true));
  if (mask == "full") {
    // all cells trained
  } else if (mask == "six-three") {
    if (rows != 3 || cols != 3) throw ConfigError("six-three mask needs a 3x3 grid");
    for (int d = 0; d < 3; ++d) g.train_mask[d][d] = false;
  } else if (mask == "four-five") {
    if (rows != 3 || cols != 3) throw ConfigError("four-five mask needs a 3x3 grid");
    g.train_mask.assign(3, std::vector<bool>(3, false));
    g.train_mask[0][2] = true;
    g.train_mask[1][2] = true;
    g.train_mask[2][0] = true;
    g.train_mask[2][1] = true;
  } else {
    throw ConfigError("unknown grid mask: " + mask);
  }
  return g;
}

std::unique_ptr<Env> make_env_params(const std::string& family,
                                     const std::vector<double>& dynamics_params,
                                     const std::vector<double>& goal_params) {
  if (family.rfind("cartpole", 0) == 0) {
    if (dynamics_params.size() != 1 || goal_params.size() != 1) {
      throw ConfigError("cartpole tasks take 1 dynamics and 1 goal parameter");
    }
    return std::make_unique<CartpoleEnv>(dynamics_params[0], goal_params[0]);
  }
  if (family.rfind("reacher", 0) == 0) {
    if (dynamics_params.size() != 2 || goal_params.size() != 2) {
      throw ConfigError("reacher tasks take 2 dynamics and 2 goal parameters");
    }
    return std::make_unique<ReacherEnv>(dynamics_params[0], dynamics_params[1],
                                        goal_params[0], goal_params[1]);
  }
  throw ConfigError("unknown task family: " + family);
}

std::unique_ptr<Env> make_env(const TaskGrid& grid, int i, int j) {
  if (i < 0 || i >= grid.rows() || j < 0 || j >= grid.cols()) {
    throw ConfigError("task index out of range");
  }
  return make_env_params(grid.family, grid.dynamics_params[i], grid.goal_params[j]);
}

}  // namespace dse
