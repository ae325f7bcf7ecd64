#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "poselift/data.hpp"
#include "poselift/encoding.hpp"
#include "poselift/model.hpp"
#include "poselift/pose.hpp"

namespace poselift {

// Mean Euclidean distance over joints (and frames). Throws DataError when
// joint or frame counts differ.
double mpjpe(const Pose3D& pred, const Pose3D& gt);
double mpjpe(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt);

struct SimilarityTransform {
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    bool reflection_corrected = false; // the unconstrained optimum was a reflection
    bool degenerate = false;           // cross-covariance rank < 2; alignment is best effort
};

struct ProcrustesResult {
    Pose3D aligned;
    SimilarityTransform transform;
};

// Least-squares similarity transform s*R*pred + t onto gt, R a proper
// rotation. Needs at least three joints.
ProcrustesResult procrustes_align(const Pose3D& pred, const Pose3D& gt);

double p_mpjpe(const Pose3D& pred, const Pose3D& gt);
double p_mpjpe(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt);

// Mean over frames and joints of the distance to the same joint at the
// center frame.
double movement_range(const PoseSequence2D& seq);

struct OffsetVector {
    double dx = 0.0;
    double dy = 0.0;
    double magnitude() const;
};

// Offsets are rounded to multiples of 2^-30 so that shifting dyadic
// coordinates is exact in double precision.
OffsetVector quantize_offset(OffsetVector offset);

// `count` offsets with each component uniform in (-a, a).
std::vector<OffsetVector> sample_offsets(std::size_t count, double a, std::uint64_t seed);

struct ShiftRow {
    OffsetVector offset;
    double error_vs_gt = 0.0;  // MPJPE(P_s, P_g)
    double consistency = 0.0;  // MPJPE(P_o, P_s)
    double original_error = 0.0; // MPJPE(P_o, P_g) on the same windows
    std::size_t evaluated = 0;
    std::size_t skipped = 0;   // shifted input left (-1, 1)
};

// Evaluates the model on original and shifted inputs for every offset.
std::vector<ShiftRow> shift_experiment(FeatureFusionNetwork& network, const std::vector<Window>& windows,
                                       const std::vector<OffsetVector>& offsets);

struct MRSubset {
    std::size_t id = 0;
    double mr_min = 0.0;
    double mr_max = 0.0;
    std::vector<std::size_t> members; // window indices
    double mpjpe = 0.0;               // NaN for an empty subset
};

// Windows sorted by movement range and cut into `bins` equal-count subsets
// (sizes differ by at most one, larger ones last). Windows with equal MR
// always share a subset, in the lowest one any of them would occupy.
std::vector<MRSubset> mr_stratify(const std::vector<double>& movement_ranges, const std::vector<Pose3D>& predictions,
                                  const std::vector<Pose3D>& targets, std::size_t bins = 10);

std::vector<MRSubset> mr_stratified_eval(FeatureFusionNetwork& network, const std::vector<Window>& windows,
                                         std::size_t bins = 10);

std::vector<Pose3D> predict_windows(FeatureFusionNetwork& network, const std::vector<Window>& windows);

} // namespace poselift
