#pragma once

#include <cstdint>
#include <random>

namespace qpower {

// Independent engine per (seed, stream, index) triple.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Fresh distribution per draw, so a draw depends only on the engine state.
inline double unit_normal(std::mt19937_64& engine) {
  return std::normal_distribution<double>(0.0, 1.0)(engine);
}

namespace stream {
inline constexpr std::uint64_t kNoisePhase = 0x6e6f697365ULL;
inline constexpr std::uint64_t kDrift = 0x6472696674ULL;
inline constexpr std::uint64_t kFloor = 0x666c6f6f72ULL;
inline constexpr std::uint64_t kShots = 0x73686f7473ULL;
inline constexpr std::uint64_t kSetpointNoise = 0x7365747074ULL;
inline constexpr std::uint64_t kDispersion = 0x6469737072ULL;
}  // namespace stream

}  // namespace qpower
