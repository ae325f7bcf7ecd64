#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace poselift {

// 64-bit FNV-1a. Stable across platforms, used for config hashes, parameter
// fingerprints and checkpoint checksums.
class Fnv1a {
public:
    void update(std::span<const unsigned char> bytes) {
        for (unsigned char b : bytes) {
            state_ ^= b;
            state_ *= 0x100000001B3ULL;
        }
    }
    void update(std::string_view text) {
        update(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
    }
    template <typename T>
    void update_values(std::span<const T> values) {
        update(std::span(reinterpret_cast<const unsigned char*>(values.data()), values.size_bytes()));
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

} // namespace poselift
