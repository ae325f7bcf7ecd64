#include "poselift/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "poselift/errors.hpp"

namespace poselift {

PoseSequence2D::PoseSequence2D(std::size_t frames, std::size_t joints, std::vector<double> coords,
                               std::size_t root_index)
    : frames_(frames), joints_(joints), root_(root_index), coords_(std::move(coords)) {
    if (frames_ == 0 || frames_ % 2 == 0) {
        throw ConfigError("pose window length must be odd, got " + std::to_string(frames_));
    }
    if (joints_ == 0 || root_ >= joints_) throw ConfigError("root joint index out of range");
    if (coords_.size() != frames_ * joints_ * 2) throw ConfigError("pose window coordinate count mismatch");
}

bool PoseSequence2D::inside_unit_box() const {
    for (double v : coords_) {
        if (!(v > -1.0 && v < 1.0)) return false;
    }
    return true;
}

PoseSequence2D PoseSequence2D::shifted(double dx, double dy) const {
    PoseSequence2D out = *this;
    for (std::size_t i = 0; i < out.coords_.size(); i += 2) {
        out.coords_[i] += dx;
        out.coords_[i + 1] += dy;
    }
    return out;
}

std::size_t TemporalOperator::channels() const {
    switch (kind) {
    case TemporalKind::Sub:
    case TemporalKind::SubWindowed:
        return 2;
    case TemporalKind::InnerProduct:
    case TemporalKind::CrossProduct:
    case TemporalKind::Cosine:
        return 1;
    case TemporalKind::SubPlusSquare:
        return 4;
    }
    return 0;
}

std::string TemporalOperator::name() const {
    switch (kind) {
    case TemporalKind::Sub:
        return "SUB";
    case TemporalKind::InnerProduct:
        return "IP";
    case TemporalKind::CrossProduct:
        return "CP";
    case TemporalKind::Cosine:
        return "CS";
    case TemporalKind::SubPlusSquare:
        return "SUB+SUB_S";
    case TemporalKind::SubWindowed:
        return "SUB(" + std::to_string(window) + "f)";
    }
    return "?";
}

TemporalOperator TemporalOperator::parse(std::string_view text) {
    if (text == "SUB") return {TemporalKind::Sub};
    if (text == "IP") return {TemporalKind::InnerProduct};
    if (text == "CP") return {TemporalKind::CrossProduct};
    if (text == "CS") return {TemporalKind::Cosine};
    if (text == "SUB+SUB_S") return {TemporalKind::SubPlusSquare};
    if (text.starts_with("SUB(") && text.ends_with("f)")) {
        const std::string digits(text.substr(4, text.size() - 6));
        if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
            const auto window = std::stoul(digits);
            if (window % 2 == 1) return {TemporalKind::SubWindowed, window};
        }
        throw ConfigError("windowed subtraction needs an odd frame count: " + std::string(text));
    }
    throw ConfigError("unknown temporal operator: " + std::string(text));
}

std::size_t channel_count(const InputFlags& flags, const TemporalOperator& op) {
    return (flags.absolute ? 2 : 0) + (flags.positional ? 2 : 0) + (flags.temporal ? op.channels() : 0);
}

std::vector<double> positional_encode(const PoseSequence2D& seq) {
    const std::size_t frames = seq.frames(), joints = seq.joints(), root = seq.root_index();
    std::vector<double> out(frames * joints * 2);
    for (std::size_t t = 0; t < frames; ++t) {
        const double rx = seq.x(t, root), ry = seq.y(t, root);
        for (std::size_t j = 0; j < joints; ++j) {
            out[(t * joints + j) * 2] = seq.x(t, j) - rx;
            out[(t * joints + j) * 2 + 1] = seq.y(t, j) - ry;
        }
    }
    return out;
}

namespace {

constexpr double kCosineNormFloor = 1e-12;

} // namespace

std::vector<double> temporal_encode(const PoseSequence2D& seq, const TemporalOperator& op) {
    const std::size_t frames = seq.frames(), joints = seq.joints(), center = seq.center_index();
    const std::size_t width = op.channels();
    if (op.kind == TemporalKind::SubWindowed && (op.window % 2 == 0 || op.window > frames)) {
        throw ConfigError("windowed subtraction needs an odd window no longer than the sequence");
    }
    const std::size_t half = op.window / 2;

    std::vector<double> out(frames * joints * width, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t j = 0; j < joints; ++j) {
            const double tx = seq.x(t, j), ty = seq.y(t, j);
            const double cx = seq.x(center, j), cy = seq.y(center, j);
            double* cell = out.data() + (t * joints + j) * width;
            switch (op.kind) {
            case TemporalKind::Sub:
                cell[0] = tx - cx;
                cell[1] = ty - cy;
                break;
            case TemporalKind::SubWindowed:
                if (t + half >= center && t <= center + half) {
                    cell[0] = tx - cx;
                    cell[1] = ty - cy;
                }
                break;
            case TemporalKind::InnerProduct:
                cell[0] = tx * cx + ty * cy;
                break;
            case TemporalKind::CrossProduct:
                cell[0] = tx * cy - ty * cx;
                break;
            case TemporalKind::Cosine: {
                const double nt = std::hypot(tx, ty), nc = std::hypot(cx, cy);
                if (nt >= kCosineNormFloor && nc >= kCosineNormFloor) {
                    cell[0] = std::clamp((tx * cx + ty * cy) / (nt * nc), -1.0, 1.0);
                }
                break;
            }
            case TemporalKind::SubPlusSquare:
                cell[0] = tx - cx;
                cell[1] = ty - cy;
                cell[2] = cell[0] * cell[0];
                cell[3] = cell[1] * cell[1];
                break;
            }
        }
    }
    return out;
}

EnhancedInput assemble_input(const PoseSequence2D& seq, const InputFlags& flags, const TemporalOperator& op) {
    if (!flags.absolute && !flags.positional && !flags.temporal) {
        throw ConfigError("input needs at least one of absolute, positional or temporal channels");
    }
    EnhancedInput in;
    in.frames = seq.frames();
    in.joints = seq.joints();
    in.channels = channel_count(flags, op);
    in.flags = flags;
    in.op = op;
    in.values.resize(in.frames * in.joints * in.channels);

    std::vector<double> positional, temporal;
    if (flags.positional) positional = positional_encode(seq);
    if (flags.temporal) temporal = temporal_encode(seq, op);
    const std::size_t tw = op.channels();

    for (std::size_t t = 0; t < in.frames; ++t) {
        for (std::size_t j = 0; j < in.joints; ++j) {
            const std::size_t cell = t * in.joints + j;
            double* dst = in.values.data() + cell * in.channels;
            if (flags.absolute) {
                *dst++ = seq.x(t, j);
                *dst++ = seq.y(t, j);
            }
            if (flags.positional) {
                *dst++ = positional[cell * 2];
                *dst++ = positional[cell * 2 + 1];
            }
            if (flags.temporal) {
                for (std::size_t c = 0; c < tw; ++c) *dst++ = temporal[cell * tw + c];
            }
        }
    }
    return in;
}

Point2 normalize_coords(Point2 pixel, double width, double height) {
    if (!(width > 0.0 && height > 0.0)) throw ConfigError("image size must be positive");
    return {(2.0 * pixel.x - width) / width, (2.0 * pixel.y - height) / width};
}

Point2 denormalize_coords(Point2 normalized, double width, double height) {
    if (!(width > 0.0 && height > 0.0)) throw ConfigError("image size must be positive");
    return {(normalized.x * width + width) / 2.0, (normalized.y * width + height) / 2.0};
}

} // namespace poselift
