#include "dse/rng.hpp"

namespace dse {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t stream_seed(uint64_t run_seed, uint64_t i, uint64_t j, uint64_t t,
                     RngPurpose purpose) {
  uint64_t h = splitmix64(run_seed);
  h = splitmix64(h ^ (i + 0x100));
  h = splitmix64(h ^ (j + 0x10000));
  h = splitmix64(h ^ t);
  h = splitmix64(h ^ static_cast<uint64_t>(purpose));
  return h;
}

std::mt19937_64 make_stream(uint64_t run_seed, uint64_t i, uint64_t j, uint64_t t,
                            RngPurpose purpose) {
  return std::mt19937_64(stream_seed(run_seed, i, j, t, purpose));
}

}  // namespace dse
