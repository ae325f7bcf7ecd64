#pragma once

#include <cstddef>
#include <vector>

namespace poselift {

// Root-relative 3D joints in millimeters, row-major (joint, xyz).
struct Pose3D {
    std::size_t joints = 0;
    std::vector<double> coords;

    Pose3D() = default;
    explicit Pose3D(std::size_t j) : joints(j), coords(j * 3, 0.0) {}
    Pose3D(std::size_t j, std::vector<double> values) : joints(j), coords(std::move(values)) {}

    double& at(std::size_t j, std::size_t axis) { return coords[j * 3 + axis]; }
    double at(std::size_t j, std::size_t axis) const { return coords[j * 3 + axis]; }
};

} // namespace poselift
