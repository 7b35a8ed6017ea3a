#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nnecon/errors.hpp"

namespace nnecon {

// Splittable counter-based stream (SplitMix64). Streams derived from
// (seed, id...) are independent of scheduling and thread count, and the
// sequence is bit-identical across platforms, which std:: distributions
// do not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derive a child stream keyed by an integer id. Mixing both the current
  // state and the id keeps streams for distinct ids decorrelated.
  Rng split(std::uint64_t id) const { return Rng(mix(state_ ^ mix(id + 0x632be59bd9b4e019ULL))); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  int binomial(int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  // Index drawn with the given probabilities (assumed to sum to ~1).
  std::size_t categorical(std::span<const double> probs) {
    if (probs.empty()) throw DomainError("categorical: empty distribution");
    const double u = uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return probs.size() - 1;
  }

  // Partial Fisher-Yates: k distinct indices from [0, n), k <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw DomainError("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace nnecon
