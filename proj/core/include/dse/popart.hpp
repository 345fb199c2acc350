#pragma once

#include <span>
#include <vector>

namespace dse {

/// Running-moment target standardization, maintained per task so every task
/// contributes comparably scaled gradients. Only the normalization half is
/// needed here (no value-network outputs to preserve).
struct PopArt {
  double mu = 0.0;
  double nu = 1.0;  // second raw moment
  double beta = 0.02;
  double sigma_min = 1e-4;

  void update(double y) {
    mu = (1.0 - beta) * mu + beta * y;
    nu = (1.0 - beta) * nu + beta * y * y;
  }
  double sigma() const;
  double normalize(double y) const { return (y - mu) / sigma(); }

  /// Sequentially folds each value into the statistics and normalizes it with
  /// the post-update statistics, in place.
  void update_and_normalize(std::span<double> values);
};

}  // namespace dse
