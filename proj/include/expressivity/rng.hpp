#pragma once

#include <cstdint>
#include <random>

namespace expressivity {

// splitmix64 finalizer. Used to decorrelate seeds derived from one base seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Child seed `index` of `base`. split(base, i) depends only on (base, i), so
// any run can be reproduced in isolation.
constexpr std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

// The single generator type used for every random draw in the library.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

}  // namespace expressivity
