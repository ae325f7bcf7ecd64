#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "poselift/data.hpp"
#include "poselift/errors.hpp"
#include "poselift/rng.hpp"

namespace poselift {

namespace {

// Rest-pose bone directions, camera convention: x right, y down, z forward.
struct RestBone {
    Bone bone;
    Eigen::Vector3d direction;
    double swing_rad; // oscillation budget at amplitude 1
};

std::vector<RestBone> rest_bones17() {
    const Eigen::Vector3d left(1, 0, 0), right(-1, 0, 0), up(0, -1, 0), down(0, 1, 0);
    return {
        {{0, 1, 130.0}, right, 0.10},  {{1, 2, 450.0}, down, 0.60},  {{2, 3, 440.0}, down, 0.60},
        {{0, 4, 130.0}, left, 0.10},   {{4, 5, 450.0}, down, 0.60},  {{5, 6, 440.0}, down, 0.60},
        {{0, 7, 230.0}, up, 0.20},     {{7, 8, 250.0}, up, 0.20},    {{8, 9, 110.0}, up, 0.25},
        {{9, 10, 120.0}, up, 0.30},    {{8, 11, 150.0}, left, 0.15}, {{11, 12, 280.0}, down, 0.90},
        {{12, 13, 250.0}, down, 0.80}, {{8, 14, 150.0}, right, 0.15}, {{14, 15, 280.0}, down, 0.90},
        {{15, 16, 250.0}, down, 0.80},
    };
}

// Sum of three sinusoids with seeded amplitude, frequency and phase.
struct Oscillator {
    std::array<double, 3> amplitude{};
    std::array<double, 3> frequency{};
    std::array<double, 3> phase{};

    static Oscillator draw(std::mt19937_64& gen, double budget) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Oscillator o;
        for (std::size_t k = 0; k < 3; ++k) {
            o.amplitude[k] = budget * unit(gen) / static_cast<double>(k + 1);
            o.frequency[k] = 0.2 + 1.3 * unit(gen); // Hz at 50 fps
            o.phase[k] = 2.0 * std::numbers::pi * unit(gen);
        }
        return o;
    }

    double at(double seconds) const {
        double v = 0.0;
        for (std::size_t k = 0; k < 3; ++k)
            v += amplitude[k] * std::sin(2.0 * std::numbers::pi * frequency[k] * seconds + phase[k]);
        return v;
    }
};

constexpr double kFramesPerSecond = 50.0;
constexpr double kMinDepthMm = 500.0;
// Generated keypoints stay within this normalized radius so that shifted
// copies of the inputs still fit the unit box.
constexpr double kNormalizedMargin = 0.8;

} // namespace

void SkeletonModel::validate() const {
    if (joints == 0 || root >= joints) throw ConfigError("skeleton root out of range");
    if (joint_names.size() != joints) throw ConfigError("skeleton needs one name per joint");
    if (bones.size() + 1 != joints) throw ConfigError("skeleton bones do not form a tree over the joints");
    std::vector<bool> placed(joints, false);
    placed[root] = true;
    for (const auto& b : bones) {
        if (b.parent >= joints || b.child >= joints) throw ConfigError("bone joint index out of range");
        if (!placed[b.parent]) throw ConfigError("bone parent must precede its children");
        if (placed[b.child]) throw ConfigError("joint reached by two bones");
        if (!(b.length_mm > 0.0)) throw ConfigError("bone lengths must be positive");
        placed[b.child] = true;
    }
}

SkeletonModel SkeletonModel::default17() {
    SkeletonModel s;
    s.joints = 17;
    s.root = 0;
    s.joint_names = {"pelvis",  "r_hip",      "r_knee",  "r_ankle", "l_hip",      "l_knee",  "l_ankle",
                     "spine",   "thorax",     "neck",    "head",    "l_shoulder", "l_elbow", "l_wrist",
                     "r_shoulder", "r_elbow", "r_wrist"};
    for (const auto& rb : rest_bones17()) s.bones.push_back(rb.bone);
    return s;
}

PoseSequenceRecord synth_generate(const SkeletonModel& skeleton, const CameraSpec& camera, std::uint64_t seed,
                                  const SynthOptions& options) {
    skeleton.validate();
    if (options.amplitude < 0.0) throw ConfigError("amplitude must be non-negative");
    if (options.frames == 0) throw ConfigError("frame count must be positive");

    // Bone directions come from the default layout when it matches; other
    // skeletons hang every bone downwards.
    const auto defaults = rest_bones17();
    std::vector<Eigen::Vector3d> directions;
    std::vector<double> swings;
    for (std::size_t b = 0; b < skeleton.bones.size(); ++b) {
        const bool known = skeleton.joints == 17 && b < defaults.size() &&
                           defaults[b].bone.parent == skeleton.bones[b].parent &&
                           defaults[b].bone.child == skeleton.bones[b].child;
        directions.push_back(known ? defaults[b].direction : Eigen::Vector3d(0, 1, 0));
        swings.push_back(known ? defaults[b].swing_rad : 0.3);
    }

    const std::size_t joints = skeleton.joints, frames = options.frames;
    const double w = static_cast<double>(camera.width), h = static_cast<double>(camera.height);

    for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
        std::mt19937_64 gen(derive_seed(seed, attempt));
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        std::vector<std::array<Oscillator, 3>> bone_motion;
        for (double swing : swings) {
            bone_motion.push_back({Oscillator::draw(gen, swing), Oscillator::draw(gen, swing), Oscillator::draw(gen, swing)});
        }
        const double base_yaw = 2.0 * std::numbers::pi * unit(gen) - std::numbers::pi;
        const Eigen::Vector3d base_root(-300.0 + 600.0 * unit(gen), -100.0 + 200.0 * unit(gen), 4500.0 + 1500.0 * unit(gen));
        const Oscillator yaw_motion = Oscillator::draw(gen, 0.8);
        const std::array<Oscillator, 3> root_motion{Oscillator::draw(gen, 500.0), Oscillator::draw(gen, 80.0),
                                                    Oscillator::draw(gen, 700.0)};

        PoseSequenceRecord rec;
        rec.subject = options.subject;
        rec.action = options.action;
        rec.frames = frames;
        rec.keypoints_px.resize(frames * joints * 2);
        rec.joints_mm.resize(frames * joints * 3);

        std::normal_distribution<double> jitter(0.0, options.pixel_noise > 0.0 ? options.pixel_noise : 1.0);
        bool feasible = true;
        std::vector<Eigen::Matrix3d> orient(joints);
        std::vector<Eigen::Vector3d> pos(joints);
        for (std::size_t f = 0; f < frames && feasible; ++f) {
            const double sec = static_cast<double>(f) / kFramesPerSecond;
            const double a = options.amplitude;
            const double yaw = base_yaw + a * yaw_motion.at(sec);
            orient[skeleton.root] = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
            pos[skeleton.root] = base_root + a * Eigen::Vector3d(root_motion[0].at(sec), root_motion[1].at(sec),
                                                                 root_motion[2].at(sec));
            for (std::size_t b = 0; b < skeleton.bones.size(); ++b) {
                const auto& bone = skeleton.bones[b];
                const Eigen::Matrix3d local =
                    (Eigen::AngleAxisd(a * bone_motion[b][0].at(sec), Eigen::Vector3d::UnitX()) *
                     Eigen::AngleAxisd(a * bone_motion[b][1].at(sec), Eigen::Vector3d::UnitY()) *
                     Eigen::AngleAxisd(a * bone_motion[b][2].at(sec), Eigen::Vector3d::UnitZ()))
                        .toRotationMatrix();
                orient[bone.child] = orient[bone.parent] * local;
                pos[bone.child] = pos[bone.parent] + orient[bone.child] * (directions[b] * bone.length_mm);
            }
            for (std::size_t j = 0; j < joints && feasible; ++j) {
                const Eigen::Vector3d& p = pos[j];
                if (p.z() < kMinDepthMm) {
                    feasible = false;
                    break;
                }
                Point2 px = project(camera, p.x(), p.y(), p.z());
                if (options.pixel_noise > 0.0) {
                    px.x += jitter(gen);
                    px.y += jitter(gen);
                }
                const Point2 n = normalize_coords(px, w, h);
                if (std::abs(n.x) >= kNormalizedMargin || std::abs(n.y) >= kNormalizedMargin || px.x <= 0.0 ||
                    px.y <= 0.0 || px.x >= w || px.y >= h) {
                    feasible = false;
                    break;
                }
                rec.keypoints_px[(f * joints + j) * 2] = px.x;
                rec.keypoints_px[(f * joints + j) * 2 + 1] = px.y;
                for (std::size_t k = 0; k < 3; ++k) rec.joints_mm[(f * joints + j) * 3 + k] = p[static_cast<Eigen::Index>(k)];
            }
        }
        if (feasible) return rec;
    }
    throw DataError("synthetic generator could not keep the skeleton in view after " +
                    std::to_string(options.max_attempts) + " attempts");
}

PoseDataset synth_dataset(std::uint64_t seed, const SynthDatasetOptions& options) {
    const SkeletonModel skeleton = SkeletonModel::default17();
    PoseDataset ds;
    ds.joints = skeleton.joints;
    ds.joint_names = skeleton.joint_names;
    ds.cameras.push_back(CameraSpec{});
    std::mt19937_64 gen(derive_seed(seed, 0xDA7A));
    std::uniform_real_distribution<double> spread(0.05, 1.0);
    for (std::size_t s = 0; s < options.sequences; ++s) {
        SynthOptions o;
        o.frames = options.frames;
        // Per-sequence amplitude spread gives a wide range of movement ranges.
        o.amplitude = options.amplitude * spread(gen);
        o.pixel_noise = options.pixel_noise;
        o.subject = static_cast<std::uint32_t>(s % 5);
        o.action = static_cast<std::uint32_t>(s);
        auto rec = synth_generate(skeleton, ds.cameras.front(), derive_seed(seed, s + 1), o);
        // Stored at container precision, so the in-memory dataset equals its file.
        for (auto& v : rec.keypoints_px) v = static_cast<float>(v);
        for (auto& v : rec.joints_mm) v = static_cast<float>(v);
        ds.sequences.push_back(std::move(rec));
    }
    return ds;
}

} // namespace poselift
