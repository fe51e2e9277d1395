#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ranklab {

// splitmix64 finalizer, used to turn (seed, stream id) pairs into fresh seeds.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derive a child seed from a parent seed and a stream id.  Every independent
// random stream in the library gets its own derived seed, so adding draws to
// one consumer never shifts the values another consumer sees.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

inline uint64_t mix_seed(uint64_t seed, std::string_view label) {
  return mix_seed(seed, fnv1a64(label));
}

// Deterministic RNG.  All draw algorithms are spelled out here instead of
// delegating to std::*_distribution, whose outputs differ across standard
// library implementations.  Same seed, same sequence, everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }
  uint64_t u64() { return engine_(); }

  // Uniform in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.  Consumes exactly two draws in the
  // overwhelmingly common case (u1 == 0 has probability 2^-53).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Uniform index in [0, n).  The modulo bias is below n / 2^64; irrelevant
  // for the universe sizes used here and, above all, deterministic.
  int index(int n) { return static_cast<int>(u64() % static_cast<uint64_t>(n)); }

  bool bernoulli(double p) { return uniform() < p; }

  // Child RNG on an independent stream derived from this RNG's own seed.
  Rng spawn(uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }
  Rng spawn(std::string_view label) const { return Rng(mix_seed(seed_, label)); }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

// Fisher-Yates shuffle with our own draw order (std::shuffle's use of the
// engine is implementation-defined).
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    int j = rng.index(i + 1);
    std::swap(v[i], v[static_cast<size_t>(j)]);
  }
}

// k distinct indices drawn uniformly from [0, n), in draw order
// (partial Fisher-Yates over an index table).
inline std::vector<int> sample_distinct(int n, int k, Rng& rng) {
  std::vector<int> pool(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<int> out(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    int j = i + rng.index(n - i);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    out[static_cast<size_t>(i)] = pool[static_cast<size_t>(i)];
  }
  return out;
}

}  // namespace ranklab
