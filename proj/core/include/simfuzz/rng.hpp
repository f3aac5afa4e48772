#pragma once

#include <cstdint>
#include <random>

namespace simfuzz {

using Rng = std::mt19937_64;

/// Independent generator for stream `index` of a campaign seeded with `seed`.
/// Every iteration (or seed-collection segment) gets its own stream, so a single
/// (seed, index) pair is enough to replay it.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

}  // namespace simfuzz
