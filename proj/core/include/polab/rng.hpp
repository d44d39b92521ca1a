#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace polab {

// splitmix64: tiny, well-mixed, and identical on every platform. All
// randomness in the lab flows through this so runs are reproducible
// bit-for-bit regardless of standard library.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive a child seed from a parent seed plus context words. Used to key
// independent streams (one per feature vector, per prompt, ...) without
// any stream ever sharing state.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0,
                            uint64_t c = 0) {
  // Each context word is folded in only after the previous state has gone
  // through a full avalanche, so words at different argument positions can
  // never cancel against each other.
  uint64_t s = seed;
  s = splitmix64(s) ^ (0x9e3779b97f4a7c15ull + a);
  s = splitmix64(s) ^ (0x517cc1b727220a95ull + b);
  s = splitmix64(s) ^ (0x2545f4914f6cdd1dull + c);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Warm the state so nearby seeds decorrelate immediately.
    (void)splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased enough for lab-sized n.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  // Box-Muller; consumes two uniforms per pair, caches the second draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::vector<double> normal_vec(size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * normal();
    return v;
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace polab
