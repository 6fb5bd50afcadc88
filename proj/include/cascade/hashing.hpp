// Seed-free deterministic hashing for the feature space.
//
// Feature templates map raw keys (strings and small state tuples) into a
// user-configured dense dimension by hashing.  The same raw key must map to
// the same index on every platform and in every run, so the hash is built
// from fixed constants only: FNV-1a over bytes for strings, the splitmix64
// finalizer for mixing.  Collisions inside the configured dimension are
// allowed by contract and simply merge features.

#pragma once

#include <cstdint>
#include <string_view>

namespace cascade {

/// FNV-1a over the bytes of `s` (64-bit).
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// splitmix64 finalizer: a cheap full-avalanche mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Folds another value into a running hash.
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ v);
}

/// Reduces a 64-bit hash into [0, dimension).
inline std::uint32_t fold_index(std::uint64_t h, std::uint32_t dimension) {
  return static_cast<std::uint32_t>(h % dimension);
}

}  // namespace cascade
