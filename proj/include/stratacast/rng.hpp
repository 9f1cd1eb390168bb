#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace stratacast {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream seed for (base, k0, k1, ...); order of keys matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(base);
  for (auto k : keys) s = splitmix64(s ^ splitmix64(k + 0x632be59bd9b4e019ull));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(base, keys));
}

}  // namespace stratacast
