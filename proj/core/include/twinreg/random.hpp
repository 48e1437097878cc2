#pragma once

#include <cstdint>
#include <random>

namespace twinreg {

using Rng = std::mt19937_64;

// Streams keep independent draws (sampling vs noise, tree k of a forest, ...)
// decorrelated while staying a pure function of the user seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x7a1e5u};
  return Rng(seq);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto rng = make_rng(seed, stream);
  return rng();
}

}  // namespace twinreg
