#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace noisyrag {

/// The raw output sequence of std::mt19937_64 is fixed by the C++ standard,
/// so it is identical on every platform. The standard distributions are not,
/// which is why every draw below is mapped by hand.
using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Substream rule: mt19937_64 seeded with splitmix64(seed ^ fnv1a64(key)).
/// Datasets use the record id as key, so a record's randomness does not
/// depend on where it sits in the file.
Rng make_stream(std::uint64_t seed, std::string_view key);

/// Uniform integer in [0, n) from exactly one 64-bit draw (multiply-high).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  __extension__ using u128 = unsigned __int128;
  const u128 wide = static_cast<u128>(rng()) * static_cast<u128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

/// Uniform real in [0, 1) with 53 bits of precision, one draw.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// One draw; p == 0 never fires and p == 1 always fires.
inline bool bernoulli(Rng& rng, double p) { return uniform_unit(rng) < p; }

/// Fisher-Yates using uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace noisyrag
