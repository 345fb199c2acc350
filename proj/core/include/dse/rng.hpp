#pragma once

#include <cstdint>
#include <random>

namespace dse {

/// splitmix64 mixing step; good avalanche, cheap, stable across platforms.
uint64_t splitmix64(uint64_t x);

/// Purposes keep logically distinct random streams independent even when the
/// other key fields coincide.
enum class RngPurpose : uint64_t {
  kInit = 1,
  kEnvReset = 2,
  kAction = 3,
  kLatent = 4,
  kReplay = 5,
  kWarmup = 6,
  kEval = 7,
  kEnvNoise = 8,
};

/// Hash of (run_seed, i, j, t, purpose): the seed of an independent
/// substream. Streams never depend on scheduling or iteration order.
uint64_t stream_seed(uint64_t run_seed, uint64_t i, uint64_t j, uint64_t t,
                     RngPurpose purpose);

std::mt19937_64 make_stream(uint64_t run_seed, uint64_t i, uint64_t j, uint64_t t,
                            RngPurpose purpose);

}  // namespace dse
