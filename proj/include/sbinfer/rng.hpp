#pragma once

#include <cstdint>
#include <random>

namespace sbinfer {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for stream `index` under `master`. Pure function of both arguments.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Fixed stream tags inside a trial.
inline constexpr std::uint64_t kContextStream = 1;
inline constexpr std::uint64_t kDecisionStream = 2;
inline constexpr std::uint64_t kParamStream = 0xb0a7ULL;
inline constexpr std::uint64_t kOracleStream = 0x0c1eULL;

}  // namespace sbinfer
