#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dse/params.hpp"

namespace dse {

enum class OptimizerKind { kSgd, kAdam };

OptimizerKind parse_optimizer_kind(const std::string& name);  // "sgd" | "adam"
std::string optimizer_kind_name(OptimizerKind kind);

/// Per-parameter-vector optimizer state. Gradients are treated as gradients of
/// a loss to MINIMIZE: values -= update. Throws TrainingDiverged if any
/// gradient is non-finite. Gradients are zeroed after a successful step.
struct Optimizer {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step_count = 0;
  std::vector<double> m;  // Adam first moment (empty for SGD)
  std::vector<double> v;  // Adam second moment

  void step(ParamVector& params);
};

}  // namespace dse
