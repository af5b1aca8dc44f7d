// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace ccnn {

/// Seeded random stream used for every stochastic step in the toolkit.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All conversions on top of it are defined here rather than
/// delegated to <random> distributions, whose algorithms are
/// implementation-defined. Version tag: "mt19937_64/ccnn-v1".
///
///   uniform()   : (u64 >> 11) * 2^-53, in [0, 1)
///   below(n)    : rejection sampling on the top of the u64 range
///   normal()    : Box-Muller cosine branch, two uniforms per call
///   shuffle()   : Fisher-Yates from the back, j = below(i + 1)
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/ccnn-v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Independent sub-seed for a named stream (splitmix64 finaliser over
/// seed and stream id), so one user seed can drive several components.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream ids for derive_seed. Stable across versions.
namespace seed_stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t train = 3;
inline constexpr std::uint64_t synth_source = 4;
inline constexpr std::uint64_t synth_target = 5;
inline constexpr std::uint64_t synth_table = 6;
}  // namespace seed_stream

}  // namespace ccnn
