#include "dse/env.hpp"

#include <stdexcept>

namespace dse {

StepResult Env::step(int) { wrong_action_kind(); }

StepResult Env::step(std::span<const double>) { wrong_action_kind(); }

void Env::wrong_action_kind() {
  throw std::logic_error("environment stepped with the wrong action kind");
}

}  // namespace dse
