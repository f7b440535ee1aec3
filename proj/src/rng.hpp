#pragma once

#include <cstdint>

namespace bf {

// splitmix64; used both as a stream mixer and to derive per-item seeds so that
// parallel and serial generation agree.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
  return mix64(seed ^ mix64(index + 1));
}

// Small deterministic generator (xorshift-multiply over a splitmix-seeded
// state). Distributions are hand-rolled so output is identical across
// standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix64(seed ^ 0x6a09e667f3bcc909ull)) {}

  uint64_t next_u64() {
    state_ = mix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  uint64_t state_;
};

}  // namespace bf
