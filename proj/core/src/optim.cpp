#include "dse/optim.hpp"

#include <cmath>

#include "dse/errors.hpp"

namespace dse {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer: " + name);
}

std::string optimizer_kind_name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

void Optimizer::step(ParamVector& params) {
  if (!params.grads_finite()) {
    throw TrainingDiverged("non-finite gradient in optimizer step");
  }
  size_t n = params.size();
  if (kind == OptimizerKind::kAdam) {
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
    ++step_count;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t k = 0; k < n; ++k) {
      double g = params.grads[k];
      m[k] = beta1 * m[k] + (1.0 - beta1) * g;
      v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      params.values[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  } else {
    ++step_count;
    for (size_t k = 0; k < n; ++k) {
      params.values[k] -= lr * params.grads[k];
    }
  }
  if (!params.values_finite()) {
    throw TrainingDiverged("non-finite parameter after optimizer step");
  }
  params.zero_grads();
}

}  // namespace dse
