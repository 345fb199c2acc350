#include "dse/params.hpp"

#include <cmath>
#include <stdexcept>

namespace dse {

bool ParamVector::grads_finite() const {
  for (double g : grads)
    if (!std::isfinite(g)) return false;
  return true;
}

bool ParamVector::values_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

std::size_t ParamVector::shape_total() const {
  std::size_t total = 0;
  for (auto [r, c] : shapes) total += static_cast<std::size_t>(r) * c;
  return total;
}

BoundParams bind(Tape& tape, const ParamVector& pv) {
  BoundParams b;
  b.pv = &pv;
  if (pv.values.empty()) return b;
  b.first = tape.leaf(pv.values[0]);
  for (std::size_t k = 1; k < pv.values.size(); ++k) tape.leaf(pv.values[k]);
  return b;
}

void harvest_grads(const Tape& tape, const BoundParams& bound, ParamVector& pv,
                   double scale) {
  if (bound.pv != &pv) throw std::invalid_argument("harvest_grads: binding mismatch");
  for (std::size_t k = 0; k < pv.size(); ++k)
    pv.grads[k] += scale * tape.grad(bound.var(k));
}

}  // namespace dse
