#pragma once

#include <cmath>
#include <cstring>
#include <random>
#include <span>
#include <vector>

#include "poselift/encoding.hpp"
#include "poselift/model.hpp"

namespace support {

// Coordinates on a 2^-20 grid within (-limit, limit); shifts by grid offsets are exact.
inline poselift::PoseSequence2D dyadic_window(std::size_t frames, std::size_t joints, std::mt19937_64& gen,
                                              double limit = 0.6) {
    const long bound = static_cast<long>(std::ldexp(limit, 20));
    std::uniform_int_distribution<long> dist(-bound, bound);
    std::vector<double> c(frames * joints * 2);
    for (auto& v : c) v = std::ldexp(static_cast<double>(dist(gen)), -20);
    return poselift::PoseSequence2D(frames, joints, std::move(c));
}

inline bool bit_identical(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Desk topology with narrow layers, for exhaustive structural checks.
inline poselift::ModelConfig narrow_config(std::size_t frames, std::size_t width = 8) {
    auto c = poselift::ModelConfig::desk_profile();
    c.frames = frames;
    c.feature_dim = width;
    c.tcn_channels = width;
    c.hidden_dim = 2 * width;
    return c;
}

inline poselift::NetworkBatch batch_of(const poselift::FeatureFusionNetwork& net,
                                       const std::vector<poselift::PoseSequence2D>& windows,
                                       std::vector<poselift::ModelInput>& storage) {
    storage.clear();
    for (const auto& w : windows) storage.push_back(poselift::prepare_input(net.config(), w));
    std::vector<const poselift::ModelInput*> ptrs;
    for (const auto& s : storage) ptrs.push_back(&s);
    return net.make_batch(ptrs);
}

} // namespace support
