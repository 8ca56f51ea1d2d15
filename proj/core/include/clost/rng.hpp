#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

// Deterministic randomness helpers. std::uniform_int_distribution and
// friends are implementation-defined, so every draw that feeds a
// reproducible artifact goes through the explicit mappings below.
namespace clost::rng {

using Engine = std::mt19937_64;

/// Unbiased integer in [0, n). n must be > 0.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = n * (UINT64_MAX / n);  // rejection threshold
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

/// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform_unit(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, Engine& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(eng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace clost::rng
