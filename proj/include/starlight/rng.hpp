#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace starlight {

/// Bit-mixing finalizer (murmur3 variant). Used to derive independent seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ULL;
  x ^= x >> 33;
  return x;
}

/// Derives the seed for sub-stream `stream` of `seed`. Distinct streams are
/// decorrelated even for consecutive seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

/// FNV-1a, for deriving RNG streams from string ids.
inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// SplitMix64 generator. Self-contained so that every stream of random numbers
/// in the library is reproducible bit-for-bit across platforms and releases;
/// std::mt19937 distributions are not portable across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
  std::uint64_t uniform_below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller. Stateless between calls (no cached spare)
  /// so a stream's output depends only on how many draws preceded it.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t state_;
};

}  // namespace starlight
