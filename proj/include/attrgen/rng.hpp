#pragma once

#include <cstdint>
#include <random>

namespace attrgen {

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return mix64(base ^ mix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2) {
  return mix64(derive_seed(base, s1) ^ mix64(s2 + 0x517cc1b727220a95ULL));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t s1, std::uint64_t s2,
                                 std::uint64_t s3) {
  return mix64(derive_seed(base, s1, s2) ^ mix64(s3 + 0x2545f4914f6cdd1dULL));
}

inline std::mt19937 make_rng(std::uint64_t seed) {
  return std::mt19937(static_cast<std::uint32_t>(mix64(seed)));
}

}  // namespace attrgen
