#pragma once

#include <stdexcept>
#include <string>

namespace dse {

/// Invalid or inconsistent experiment configuration. The CLI maps this to
/// exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss or gradient encountered during training. The CLI maps
/// this to exit code 3.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dse
