#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dse/tape.hpp"

namespace dse {

/// Flat parameter vector with matching gradient storage and per-block shape
/// metadata. Blocks are (rows, cols) pairs; a bias block is (n, 1).
struct ParamVector {
  std::vector<double> values;
  std::vector<double> grads;
  std::vector<std::pair<int, int>> shapes;

  std::size_t size() const { return values.size(); }
  void resize(std::size_t n) {
    values.assign(n, 0.0);
    grads.assign(n, 0.0);
  }
  void zero_grads() { grads.assign(grads.size(), 0.0); }
  bool grads_finite() const;
  bool values_finite() const;
  /// Sum of rows*cols over shape blocks; equals size() when metadata is set.
  std::size_t shape_total() const;
};

/// Contiguous leaf nodes for a ParamVector on a tape. Bind once per tape,
/// reuse the handles across any number of forward passes, then harvest.
struct BoundParams {
  Var first{};
  const ParamVector* pv = nullptr;
  Var var(std::size_t k) const { return Var{first.idx + static_cast<std::uint32_t>(k)}; }
};

BoundParams bind(Tape& tape, const ParamVector& pv);

/// Accumulates tape leaf gradients into pv.grads (scaled by `scale`).
void harvest_grads(const Tape& tape, const BoundParams& bound, ParamVector& pv,
                   double scale = 1.0);

}  // namespace dse
