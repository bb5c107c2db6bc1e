#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace fedscore {

// Deterministic random stream with explicit sub-stream derivation.
//
// The engine is std::mt19937_64, whose output sequence is fully specified by
// the standard. All samplers are implemented here instead of with
// std::*_distribution, whose algorithms differ between standard libraries, so
// a given seed produces identical draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  // Derives an independent stream identified by (label, a, b). Forking never
  // consumes draws and does not depend on how many draws were taken, so the
  // same fork of the same stream always starts identically.
  Rng fork(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0) const;

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased draw from [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang squeeze. shape must be positive.
  double gamma(double shape);

  // Symmetric Dirichlet(alpha) over k components.
  std::vector<double> dirichlet(double alpha, std::size_t k);

  // Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

  // Uniformly random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// FNV-1a over the bytes of a label, used for stream derivation.
std::uint64_t hash_label(std::string_view s);

// SplitMix64 finalizer; mixes seed material into well-separated child seeds.
std::uint64_t mix_u64(std::uint64_t x);

}  // namespace fedscore
