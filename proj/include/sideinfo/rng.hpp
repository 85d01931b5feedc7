#pragma once

// Deterministic random source. Everything that touches randomness in this
// library draws from Rng, never from std distributions, because the standard
// only pins down the engine, not the distributions. The engine (mt19937_64)
// and the transforms below are fully specified here, so a seed pins the exact
// sample stream.
//
// Substreams: a consumer forks its own generator with substream("label").
// The fork is derived from the parent's seed (not its draw position), so
// drawing from one substream never perturbs another.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "sideinfo/matrix.hpp"

namespace sideinfo {

namespace detail {

// SplitMix64 finalizer, used only to spread seed bits.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(detail::mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Forks a generator whose seed depends on (parent seed, label, index) only.
  Rng substream(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = detail::fnv1a64(label);
    h ^= detail::mix64(index ^ 0x5851f42d4c957f2dull);
    return Rng(detail::mix64(seed_ ^ h));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0,1): (k + 0.5) / 2^53 with k in [0, 2^53).
  double uniform() {
    const std::uint64_t k = next_u64() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Marsaglia polar transform (a Box-Muller variant
  // that needs only sqrt and log). Pairs are cached; rejection keeps the
  // stream deterministic because it only consumes uniform() draws.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // n = 0 yields an empty vector.
  Vec normal_vec(std::size_t n) {
    Vec out(n);
    for (double& x : out) x = normal();
    return out;
  }

  std::size_t index(std::size_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::index: bound must be positive");
    return static_cast<std::size_t>(next_u64() % bound);
  }

  // Fisher-Yates, high index down, j = next_u64() % (i+1).
  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sideinfo
