#pragma once

#include <cstdint>
#include <string_view>

namespace smia {

// SplitMix64 (Steele, Lea, Flood 2014). Every seeded draw in the toolkit goes
// through this generator so that independent implementations agree bit-for-bit:
//   state += 0x9E3779B97F4A7C15; z = state;
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//   return z ^ (z >> 31);
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }

  // Index in [0, n) via the multiply-high reduction: (next() * n) >> 64.
  std::uint64_t uniform_index(std::uint64_t n);

  // Double in [0, 1) from the top 53 bits.
  double uniform01();

  std::uint64_t state() const { return state_; }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

 private:
  std::uint64_t state_;
};

// SplitMix64 output function applied to a single value.
std::uint64_t mix64(std::uint64_t x);

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

// Order-sensitive combination: mix64(seed ^ (value + 0x9E3779B97F4A7C15 + (seed << 6) + (seed >> 2))).
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

// Derives an independent stream seed from a base seed and a string label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

// In-place Fisher-Yates shuffle driven by uniform_index (i from size-1 down to 1).
template <typename Range>
void shuffle(Range& range, SplitMix64& rng) {
  const auto n = static_cast<std::uint64_t>(range.size());
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.uniform_index(i);
    using std::swap;
    swap(range[i - 1], range[j]);
  }
}

}  // namespace smia
