#ifndef STABLEIK_RNG_HPP_
#define STABLEIK_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace stableik {

/// SplitMix64 step; used to spread seeds across independent streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random source. All mappings from raw bits to doubles and
/// bounded integers are implemented here rather than with std::*_distribution
/// so that identical seeds give identical streams on every standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform over {0, ..., n-1}. Rejection keeps the mapping exact.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller (cosine branch only, no cached state).
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Independent child stream identified by a small integer tag.
  Rng derive(std::uint64_t stream) const {
    return Rng(splitmix64(base_seed_mix() + 0x632be59bd9b4e019ULL * (stream + 1)));
  }

  /// Seed a child stream without consuming state from this one.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) + 0x632be59bd9b4e019ULL * (stream + 1));
  }

private:
  std::uint64_t base_seed_mix() const {
    // mt19937_64 exposes no state; derivation uses a copy's next output.
    std::mt19937_64 copy = eng_;
    return copy();
  }

  std::mt19937_64 eng_;
};

}  // namespace stableik

#endif  // STABLEIK_RNG_HPP_
