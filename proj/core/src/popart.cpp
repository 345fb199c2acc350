#include "dse/popart.hpp"

#include <algorithm>
#include <cmath>

namespace dse {

double PopArt::sigma() const {
  return std::sqrt(std::max(nu - mu * mu, sigma_min * sigma_min));
}

void PopArt::update_and_normalize(std::span<double> values) {
  for (double& y : values) {
    update(y);
    y = normalize(y);
  }
}

}  // namespace dse
