#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "poselift/encoding.hpp"
#include "poselift/pose.hpp"

namespace poselift {

struct CameraSpec {
    double focal = 1000.0; // pixels
    double cx = 512.0;
    double cy = 512.0;
    std::size_t width = 1024;
    std::size_t height = 1024;

    bool operator==(const CameraSpec&) const = default;
};

// Pinhole projection of a camera-space point (mm) to pixels.
Point2 project(const CameraSpec& camera, double x, double y, double z);

struct PoseSequenceRecord {
    std::uint32_t subject = 0;
    std::uint32_t action = 0;
    std::uint32_t camera = 0;
    std::size_t frames = 0;
    std::vector<double> keypoints_px; // frames x J x 2
    std::vector<double> joints_mm;    // frames x J x 3, camera space
};

struct PoseDataset {
    std::size_t joints = 0;
    std::vector<std::string> joint_names;
    std::vector<CameraSpec> cameras;
    std::vector<PoseSequenceRecord> sequences;

    void validate() const;
    std::size_t total_frames() const;
};

// Container format:
//
//   Text header, one record per line, terminated by "end\n":
//     POSEDATA 1
//     joints <J>
//     names <name_0> ... <name_J-1>
//     cameras <C>
//     camera <i> <focal> <cx> <cy> <width> <height>     (C lines)
//     sequences <S>
//     sequence <i> <subject> <action> <camera> <frames>  (S lines)
//     end
//   Then, per sequence in order, two blocks of little-endian float32 values,
//   row-major (frame, joint, coord): the 2D pixels (F x J x 2) followed by
//   the 3D camera-space millimeters (F x J x 3).
//
// Values are rounded to float32 on write.
void write_dataset(const PoseDataset& dataset, const std::filesystem::path& path);
PoseDataset read_dataset(const std::filesystem::path& path);

struct Window {
    PoseSequence2D input; // normalized coordinates
    Pose3D target;        // root-relative millimeters
    std::size_t sequence = 0;
    std::size_t frame = 0;
};

// One window per frame, centered on it, with the edge frames replicated past
// the sequence ends.
std::vector<Window> extract_windows(const PoseDataset& dataset, std::size_t sequence, std::size_t frames,
                                    std::size_t root_index = 0);
std::vector<Window> extract_all_windows(const PoseDataset& dataset, std::size_t frames, std::size_t root_index = 0);

struct Bone {
    std::size_t parent = 0;
    std::size_t child = 0;
    double length_mm = 0.0;
};

struct SkeletonModel {
    std::size_t joints = 0;
    std::size_t root = 0;
    std::vector<std::string> joint_names;
    std::vector<Bone> bones; // parents precede children

    void validate() const;
    // 17-joint human layout matching GroupPartition::default17().
    static SkeletonModel default17();
};

struct SynthOptions {
    std::size_t frames = 243;
    double amplitude = 1.0;   // scales joint oscillation and root travel; 0 is static
    double pixel_noise = 0.0; // seeded Gaussian jitter (px), off by default
    std::uint32_t subject = 0;
    std::uint32_t action = 0;
    std::size_t max_attempts = 64;
};

// Seeded sinusoidal joint motion, forward kinematics, a seeded root path and
// pinhole projection. Every joint stays 0.5 m or more in front of the camera
// and inside the image; otherwise the motion is redrawn.
PoseSequenceRecord synth_generate(const SkeletonModel& skeleton, const CameraSpec& camera, std::uint64_t seed,
                                  const SynthOptions& options);

struct SynthDatasetOptions {
    std::size_t sequences = 20;
    std::size_t frames = 243;
    double amplitude = 1.0;
    double pixel_noise = 0.0;
};

// Sequences of the default skeleton with per-sequence amplitudes drawn from
// amplitude * U(0.05, 1). Values are rounded to float32, the container
// precision, so writing and reading the result reproduces it exactly.
PoseDataset synth_dataset(std::uint64_t seed, const SynthDatasetOptions& options);

// Seeded split by sequence; `validation_fraction` of the sequences (at least
// one when there are two or more) go to the second list.
struct SequenceSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};
SequenceSplit split_sequences(std::size_t count, double validation_fraction, std::uint64_t seed);

} // namespace poselift
