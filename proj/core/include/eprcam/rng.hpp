#pragma once

#include <cstdint>
#include <random>

namespace eprcam::rng {

using Engine = std::mt19937_64;

/// Substream families. Values are part of the on-disk determinism contract:
/// changing them changes every simulated frame.
enum class Stream : std::uint64_t {
    Dark = 1,
    ImagePlane = 2,
    FarField = 3,
    Bootstrap = 4,
    Test = 99,
};

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for item `index` of `stream` under `master`. Each frame owns its own
/// substream so frames can be produced in any order (or regenerated) and still
/// be bit-identical.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index) noexcept {
    return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

inline Engine make_engine(std::uint64_t master, Stream stream, std::uint64_t index) {
    return Engine(derive_seed(master, stream, index));
}

}  // namespace eprcam::rng
