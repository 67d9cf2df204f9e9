#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace sslreg {

using Rng = std::mt19937_64;

/// Independent streams derived from one experiment seed. Each consumer owns
/// its stream so that enabling one feature never shifts another's draws.
enum class Stream : std::uint32_t {
  kInit = 1,
  kBatchOrder = 2,
  kDropout = 3,
  kCorruption = 4,
  kHeadReinit = 5,
  kData = 6,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace sslreg
