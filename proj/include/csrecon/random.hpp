#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "csrecon/error.hpp"

namespace csrecon {

/// Seedable generator with a portable output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the C++
/// standard. The standard distributions are not portable, so every mapping
/// from raw 64-bit words to indices or reals is done here:
///   - uniform_index(n): rejection sampling on the raw word, then `word % n`.
///     Words at or above the largest multiple of n are redrawn.
///   - uniform(): top 53 bits scaled by 2^-53, giving [0, 1).
///   - normal(): Box-Muller on two uniform() draws (no caching).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  std::uint64_t uniform_index(std::uint64_t bound) {
    if (bound == 0) throw InvalidArgument("uniform_index: bound must be positive");
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    // 2^64 mod bound, computed without overflow.
    const std::uint64_t rem = (kMax % bound + 1) % bound;
    std::uint64_t word = engine_();
    if (rem != 0) {
      const std::uint64_t cut = 0 - rem;  // 2^64 - rem
      while (word >= cut) word = engine_();
    }
    return word % bound;
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index (splitmix64 finalizer) so that
/// per-block or per-trial generators are independent of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Draws `count` distinct indices from [0, total) by a partial Fisher-Yates
/// shuffle; the result is in draw order (not sorted).
inline std::vector<std::int64_t> sample_without_replacement(std::int64_t total, std::int64_t count,
                                                            Rng& rng) {
  if (count < 0 || count > total) {
    throw InvalidArgument("sample_without_replacement: count must lie in [0, total]");
  }
  std::vector<std::int64_t> pool(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(total - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace csrecon
