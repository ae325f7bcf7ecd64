#pragma once

#include <cstdint>

namespace poselift {

// Stateless counter-based generator: every (seed, stream, index) triple maps
// to an independent uniform draw, so results do not depend on call order.
struct CounterRng {
    std::uint64_t seed = 0;

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const {
        return mix(mix(seed ^ mix(stream)) + index);
    }

    // Uniform in [0, 1) with 53 random bits.
    constexpr double uniform(std::uint64_t stream, std::uint64_t index) const {
        return static_cast<double>(bits(stream, index) >> 11) * 0x1.0p-53;
    }
};

// Derives a child seed; used to give epochs, batches and runs their own streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return CounterRng::mix(seed ^ CounterRng::mix(salt + 0x632BE59BD9B4E019ULL));
}

} // namespace poselift
