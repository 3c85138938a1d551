#ifndef TOWERLAB_RNG_HPP
#define TOWERLAB_RNG_HPP

#include <cstdint>

namespace towerlab {

// Deterministic, platform-independent RNG for reproducible Monte Carlo.
// xoshiro256++ seeded through splitmix64. Worker substreams are derived
// from (master seed, stream index) so that sharded runs are reproducible
// and shards are statistically independent.

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 sm(seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL));
    for (auto& w : s_) w = sm.next();
    // A few warmup rounds so nearby streams decorrelate.
    for (int i = 0; i < 8; ++i) next_u64();
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0,1) with 53 random bits; bit-exact across platforms.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [a,b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer in [0,n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Multiply-shift; bias is negligible for n << 2^64 and the result is
    // deterministic, which matters more here than perfect equidistribution.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace towerlab

#endif
