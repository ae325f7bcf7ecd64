#include "poselift/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "poselift/errors.hpp"
#include "poselift/rng.hpp"

namespace poselift {

namespace {

double distance_sum(const Pose3D& a, const Pose3D& b) {
    if (a.joints != b.joints || a.coords.size() != b.coords.size()) {
        throw DataError("pose joint counts differ: " + std::to_string(a.joints) + " vs " + std::to_string(b.joints));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < a.joints; ++j) {
        const double dx = a.at(j, 0) - b.at(j, 0), dy = a.at(j, 1) - b.at(j, 1), dz = a.at(j, 2) - b.at(j, 2);
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return total;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> as_points(const Pose3D& p) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> m(static_cast<Eigen::Index>(p.joints), 3);
    for (std::size_t j = 0; j < p.joints; ++j)
        for (std::size_t a = 0; a < 3; ++a) m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) = p.at(j, a);
    return m;
}

} // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
    if (pred.joints == 0) throw DataError("pose without joints");
    return distance_sum(pred, gt) / static_cast<double>(pred.joints);
}

double mpjpe(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt) {
    if (pred.size() != gt.size()) {
        throw DataError("frame counts differ: " + std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
    }
    if (pred.empty()) throw DataError("no frames to evaluate");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        total += distance_sum(pred[f], gt[f]);
        count += pred[f].joints;
    }
    return total / static_cast<double>(count);
}

ProcrustesResult procrustes_align(const Pose3D& pred, const Pose3D& gt) {
    if (pred.joints != gt.joints) throw DataError("procrustes: joint counts differ");
    if (pred.joints < 3) throw ConfigError("procrustes alignment needs at least three joints");
    const auto x = as_points(pred);
    const auto y = as_points(gt);
    const Eigen::RowVector3d mu_x = x.colwise().mean();
    const Eigen::RowVector3d mu_y = y.colwise().mean();
    const auto xc = (x.rowwise() - mu_x).eval();
    const auto yc = (y.rowwise() - mu_y).eval();

    const Eigen::Matrix3d h = xc.transpose() * yc;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    const Eigen::Vector3d sigma = svd.singularValues();

    ProcrustesResult out;
    auto& tf = out.transform;
    Eigen::Vector3d d(1.0, 1.0, 1.0);
    if ((v * u.transpose()).determinant() < 0.0) {
        d(2) = -1.0; // flip the direction of the smallest singular value
        tf.reflection_corrected = true;
    }
    const double tol = std::max(sigma(0), 1.0) * 1e-12;
    tf.degenerate = sigma(1) <= tol;
    tf.rotation = v * d.asDiagonal() * u.transpose();
    const double norm_x = xc.squaredNorm();
    tf.scale = norm_x > 0.0 ? d.dot(sigma) / norm_x : 1.0;
    tf.translation = mu_y.transpose() - tf.scale * tf.rotation * mu_x.transpose();

    out.aligned = Pose3D(pred.joints);
    for (std::size_t j = 0; j < pred.joints; ++j) {
        const Eigen::Vector3d p = tf.scale * tf.rotation * x.row(static_cast<Eigen::Index>(j)).transpose() + tf.translation;
        for (std::size_t a = 0; a < 3; ++a) out.aligned.at(j, a) = p(static_cast<Eigen::Index>(a));
    }
    return out;
}

double p_mpjpe(const Pose3D& pred, const Pose3D& gt) { return mpjpe(procrustes_align(pred, gt).aligned, gt); }

double p_mpjpe(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt) {
    if (pred.size() != gt.size()) throw DataError("frame counts differ");
    std::vector<Pose3D> aligned;
    aligned.reserve(pred.size());
    for (std::size_t f = 0; f < pred.size(); ++f) aligned.push_back(procrustes_align(pred[f], gt[f]).aligned);
    return mpjpe(aligned, gt);
}

double movement_range(const PoseSequence2D& seq) {
    const std::size_t c = seq.center_index();
    double total = 0.0;
    for (std::size_t t = 0; t < seq.frames(); ++t)
        for (std::size_t j = 0; j < seq.joints(); ++j) total += std::hypot(seq.x(t, j) - seq.x(c, j), seq.y(t, j) - seq.y(c, j));
    return total / static_cast<double>(seq.frames()) / static_cast<double>(seq.joints());
}

double OffsetVector::magnitude() const { return std::sqrt(dx * dx + dy * dy); }

OffsetVector quantize_offset(OffsetVector offset) {
    constexpr double grid = 0x1.0p30;
    return {std::round(offset.dx * grid) / grid, std::round(offset.dy * grid) / grid};
}

std::vector<OffsetVector> sample_offsets(std::size_t count, double a, std::uint64_t seed) {
    if (!(a > 0.0)) throw ConfigError("offset bound must be positive");
    const CounterRng rng{seed};
    std::vector<OffsetVector> out;
    for (std::size_t k = 0; k < count; ++k) {
        OffsetVector o{a * (2.0 * rng.uniform(k, 0) - 1.0), a * (2.0 * rng.uniform(k, 1) - 1.0)};
        o = quantize_offset(o);
        // Keep the open interval after rounding.
        o.dx = std::clamp(o.dx, -a + 0x1.0p-30, a - 0x1.0p-30);
        o.dy = std::clamp(o.dy, -a + 0x1.0p-30, a - 0x1.0p-30);
        out.push_back(o);
    }
    return out;
}

std::vector<Pose3D> predict_windows(FeatureFusionNetwork& network, const std::vector<Window>& windows) {
    std::vector<ModelInput> inputs;
    inputs.reserve(windows.size());
    for (const auto& w : windows) inputs.push_back(prepare_input(network.config(), w.input));
    return network.predict(inputs);
}

std::vector<ShiftRow> shift_experiment(FeatureFusionNetwork& network, const std::vector<Window>& windows,
                                       const std::vector<OffsetVector>& offsets) {
    std::vector<ShiftRow> rows;
    for (const auto& offset : offsets) {
        ShiftRow row;
        row.offset = offset;
        // P_o is recomputed over exactly the kept windows so both passes see
        // identical batch layouts; kernel blocking then cannot differ.
        std::vector<ModelInput> original_inputs, shifted_inputs;
        std::vector<Pose3D> kept_gt;
        for (const auto& window : windows) {
            PoseSequence2D shifted = window.input.shifted(offset.dx, offset.dy);
            if (!shifted.inside_unit_box()) {
                ++row.skipped;
                continue;
            }
            original_inputs.push_back(prepare_input(network.config(), window.input));
            shifted_inputs.push_back(prepare_input(network.config(), shifted));
            kept_gt.push_back(window.target);
        }
        row.evaluated = shifted_inputs.size();
        if (row.evaluated == 0) {
            row.error_vs_gt = row.consistency = row.original_error = std::numeric_limits<double>::quiet_NaN();
        } else {
            const auto original_pred = network.predict(original_inputs);
            const auto shifted_pred = network.predict(shifted_inputs);
            row.error_vs_gt = mpjpe(shifted_pred, kept_gt);
            row.consistency = mpjpe(original_pred, shifted_pred);
            row.original_error = mpjpe(original_pred, kept_gt);
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<MRSubset> mr_stratify(const std::vector<double>& movement_ranges, const std::vector<Pose3D>& predictions,
                                  const std::vector<Pose3D>& targets, std::size_t bins) {
    const std::size_t n = movement_ranges.size();
    if (bins == 0) throw ConfigError("need at least one subset");
    if (n < bins) {
        throw DataError("cannot split " + std::to_string(n) + " windows into " + std::to_string(bins) + " subsets");
    }
    if (predictions.size() != n || targets.size() != n) throw DataError("prediction and window counts differ");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return movement_ranges[a] < movement_ranges[b]; });

    // Nominal subset of each rank; the n % bins larger subsets come last.
    const std::size_t base = n / bins, extra = n % bins;
    std::vector<std::size_t> rank_bin(n);
    std::size_t rank = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t size = base + (b >= bins - extra ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) rank_bin[rank++] = b;
    }
    for (std::size_t r = 1; r < n; ++r) {
        if (movement_ranges[order[r]] == movement_ranges[order[r - 1]]) rank_bin[r] = rank_bin[r - 1];
    }

    std::vector<MRSubset> out(bins);
    for (std::size_t b = 0; b < bins; ++b) out[b].id = b;
    for (std::size_t r = 0; r < n; ++r) out[rank_bin[r]].members.push_back(order[r]);
    for (auto& s : out) {
        if (s.members.empty()) {
            s.mr_min = s.mr_max = s.mpjpe = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        s.mr_min = movement_ranges[s.members.front()];
        s.mr_max = movement_ranges[s.members.back()];
        std::vector<Pose3D> p, g;
        for (auto idx : s.members) {
            p.push_back(predictions[idx]);
            g.push_back(targets[idx]);
        }
        s.mpjpe = mpjpe(p, g);
    }
    return out;
}

std::vector<MRSubset> mr_stratified_eval(FeatureFusionNetwork& network, const std::vector<Window>& windows,
                                         std::size_t bins) {
    std::vector<double> mr;
    std::vector<Pose3D> targets;
    for (const auto& w : windows) {
        mr.push_back(movement_range(w.input));
        targets.push_back(w.target);
    }
    return mr_stratify(mr, predict_windows(network, windows), targets, bins);
}

} // namespace poselift
