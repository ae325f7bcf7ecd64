#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace poselift {

// A window of T frames x J joints of normalized 2D keypoints, stored
// row-major as (frame, joint, xy). T is odd and the window is centered on
// frame (T-1)/2, the pose being lifted.
class PoseSequence2D {
public:
    PoseSequence2D() = default;
    PoseSequence2D(std::size_t frames, std::size_t joints, std::vector<double> coords, std::size_t root_index = 0);

    std::size_t frames() const { return frames_; }
    std::size_t joints() const { return joints_; }
    std::size_t root_index() const { return root_; }
    std::size_t center_index() const { return (frames_ - 1) / 2; }

    double x(std::size_t t, std::size_t j) const { return coords_[(t * joints_ + j) * 2]; }
    double y(std::size_t t, std::size_t j) const { return coords_[(t * joints_ + j) * 2 + 1]; }
    std::span<const double> coords() const { return coords_; }
    std::span<double> mutable_coords() { return coords_; }

    // Every coordinate strictly inside (-1, 1).
    bool inside_unit_box() const;
    PoseSequence2D shifted(double dx, double dy) const;

private:
    std::size_t frames_ = 0;
    std::size_t joints_ = 0;
    std::size_t root_ = 0;
    std::vector<double> coords_;
};

enum class TemporalKind { Sub, InnerProduct, CrossProduct, Cosine, SubPlusSquare, SubWindowed };

struct TemporalOperator {
    TemporalKind kind = TemporalKind::Sub;
    std::size_t window = 0; // SubWindowed only: odd, <= T

    std::size_t channels() const;
    std::string name() const;
    // Accepts SUB, IP, CP, CS, SUB+SUB_S and SUB(<n>f), e.g. "SUB(9f)".
    static TemporalOperator parse(std::string_view text);
};

struct InputFlags {
    bool absolute = true;
    bool positional = false;
    bool temporal = false;

    bool operator==(const InputFlags&) const = default;
};

std::size_t channel_count(const InputFlags& flags, const TemporalOperator& op);

// Channel stack fed to the local encoders, T x J x C, blocks ordered (abs, P, T).
struct EnhancedInput {
    std::size_t frames = 0;
    std::size_t joints = 0;
    std::size_t channels = 0;
    InputFlags flags;
    TemporalOperator op;
    std::vector<double> values;

    double at(std::size_t t, std::size_t j, std::size_t c) const { return values[(t * joints + j) * channels + c]; }
};

// Each frame's joints minus that frame's root joint. T x J x 2.
std::vector<double> positional_encode(const PoseSequence2D& seq);

// Each joint at frame t combined with the same joint at the center frame. T x J x op.channels().
std::vector<double> temporal_encode(const PoseSequence2D& seq, const TemporalOperator& op);

// Throws ConfigError when every flag is off.
EnhancedInput assemble_input(const PoseSequence2D& seq, const InputFlags& flags, const TemporalOperator& op);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Maps pixel x in [0, w] onto [-1, 1]; y shares the scale so aspect ratio is kept.
Point2 normalize_coords(Point2 pixel, double width, double height);
Point2 denormalize_coords(Point2 normalized, double width, double height);

} // namespace poselift
