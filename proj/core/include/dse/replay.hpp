#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "dse/env.hpp"

namespace dse {

/// Fixed-capacity ring buffer of transitions with FIFO eviction and uniform
/// batch sampling without replacement.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return full_ ? capacity_ : next_; }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t k) const { return data_[k]; }

  /// batch distinct indices drawn uniformly from [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t batch,
                                          std::mt19937_64& rng) const;

 private:
  std::vector<Transition> data_;
  std::size_t capacity_;
  std::size_t next_ = 0;
  bool full_ = false;
};

}  // namespace dse
