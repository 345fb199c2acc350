#include "dse/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace dse {

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be > 0");
  // Sized lazily; reserve in chunks to avoid committing 3e6 slots up front.
}

void ReplayMemory::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    next_ = data_.size() % capacity_;
    full_ = data_.size() == capacity_;
    return;
  }
  data_[next_] = std::move(t);
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t batch,
                                                      std::mt19937_64& rng) const {
  const std::size_t n = size();
  if (batch > n)
    throw std::invalid_argument("replay sample larger than stored transitions");
  // Floyd's algorithm: uniform subset of `batch` distinct indices.
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    const std::size_t t = dist(rng);
    if (std::find(out.begin(), out.end(), t) != out.end()) {
      out.push_back(j);
    } else {
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace dse
