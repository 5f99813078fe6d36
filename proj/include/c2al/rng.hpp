#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace c2al {

// SplitMix64 finalizer. Used for seeding and for deriving substream seeds.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over bytes. Used for string labels and config hashing.
std::uint64_t fnv1a64(std::string_view bytes);

// xoshiro256++ stream seeded through SplitMix64.
//
// The same seed yields the same sequence on every platform: the integer
// stream is exact, and derived doubles use only IEEE-exact arithmetic plus
// sqrt/log. A generator is single-owner mutable; to use randomness from
// several components, derive one substream per component with split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal, Marsaglia polar method with a cached spare.
  double normal();

  // Uniform integer in [0, bound), unbiased rejection sampling. bound > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Independent deterministic substream:
  //   child_seed = mix64(mix64(seed) ^ mix64(label))
  // String labels hash through FNV-1a first.
  Rng split(std::uint64_t label) const;
  Rng split(std::string_view label) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace c2al
