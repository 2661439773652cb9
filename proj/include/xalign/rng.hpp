#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace xalign {

// Counter-free deterministic RNG: xoshiro256++ seeded through splitmix64.
// The draw sequence for a given seed is identical across runs; uniforms use
// the top 53 bits so the stream does not depend on platform float parsing.
// std::* distributions are deliberately avoided (their sequences are
// implementation-defined).
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t seed() const noexcept { return seed_; }

  uint64_t next_u64() noexcept {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  // Unbiased integer in [0, n); rejection sampling keeps the stream exact.
  uint64_t below(uint64_t n) noexcept {
    if (n == 0) return 0;
    const uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller, no cached spare: two uniforms per draw,
  // so the consumed stream length is input-independent.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238 * u2);
  }

  // Independent stream for a labelled sub-task (per tree, per config, ...).
  SeededRng derive(uint64_t label) const noexcept {
    uint64_t x = seed_ ^ (0x9E3779B97F4A7C15ULL * (label + 1));
    return SeededRng(splitmix64(x));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(below(i + 1));
      using std::swap;
      swap(v[i], v[j]);
    }
  }

 private:
  static uint64_t splitmix64(uint64_t& x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  uint64_t state_[4];
  uint64_t seed_;
};

}  // namespace xalign
