#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace voyagecast {

/// Counter-based 64-bit generator: output i is a SplitMix64 finalization of
/// (seed, i). Any (seed, counter) pair reproduces the same stream, so
/// independent substreams can be derived without sharing state.
///
/// Satisfies UniformRandomBitGenerator, so it plugs into <random>
/// distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream keyed by a label and an optional index.
  Rng derive(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_label(std::string_view label);

}  // namespace voyagecast
