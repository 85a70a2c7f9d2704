// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace rerender {

// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
// reproducible across platforms and standard library versions; normal draws
// use Box-Muller (no cached spare, so the stream position is a pure function
// of the number of calls).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& si : s_) si = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // i in [0, n).
  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

  double normal() {
    // Box-Muller; discard the second value of the pair.
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Derive an independent stream from this seed and a key path. Used for
  // counter-style streams (per-epoch shuffles, per-step augmentation) so that
  // resuming from a checkpoint replays the exact same draws.
  static Rng derive(uint64_t seed, uint64_t k1, uint64_t k2 = 0, uint64_t k3 = 0) {
    uint64_t x = seed;
    x = splitmix64(x) ^ (k1 * 0x9e3779b97f4a7c15ULL);
    x = splitmix64(x) ^ (k2 * 0xbf58476d1ce4e5b9ULL);
    x = splitmix64(x) ^ (k3 * 0x94d049bb133111ebULL);
    return Rng(splitmix64(x));
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t s_[4];
};

}  // namespace rerender
