#include "poselift/data.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "poselift/errors.hpp"

namespace poselift {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

Point2 project(const CameraSpec& camera, double x, double y, double z) {
    return {camera.focal * x / z + camera.cx, camera.focal * y / z + camera.cy};
}

void PoseDataset::validate() const {
    if (joints == 0) throw DataError("dataset has zero joints");
    if (joint_names.size() != joints) throw DataError("dataset needs one name per joint");
    for (const auto& c : cameras) {
        if (!(c.focal > 0.0) || c.width == 0 || c.height == 0) throw DataError("camera with non-positive focal or size");
    }
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& seq = sequences[s];
        if (seq.camera >= cameras.size()) throw DataError("sequence " + std::to_string(s) + " names a missing camera");
        if (seq.keypoints_px.size() != seq.frames * joints * 2 || seq.joints_mm.size() != seq.frames * joints * 3) {
            throw DataError("sequence " + std::to_string(s) + " has 2D/3D blocks inconsistent with " +
                            std::to_string(seq.frames) + " frames of " + std::to_string(joints) + " joints");
        }
    }
}

std::size_t PoseDataset::total_frames() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.frames;
    return n;
}

namespace {

void append_floats(std::string& out, const std::vector<double>& values) {
    for (double v : values) {
        const float f = static_cast<float>(v);
        char bytes[sizeof f];
        std::memcpy(bytes, &f, sizeof f);
        out.append(bytes, sizeof f);
    }
}

std::vector<double> read_floats(const std::string& bytes, std::size_t offset, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + offset + i * sizeof f, sizeof f);
        out[i] = f;
    }
    return out;
}

template <typename T>
T parse_field(std::istringstream& line, const std::string& what) {
    T value;
    if (!(line >> value)) throw DataError("malformed dataset header: bad " + what);
    return value;
}

std::istringstream expect_line(std::istream& in, const std::string& keyword) {
    std::string text;
    if (!std::getline(in, text)) throw DataError("malformed dataset header: missing '" + keyword + "' line");
    std::istringstream line(text);
    std::string word;
    line >> word;
    if (word != keyword) throw DataError("malformed dataset header: expected '" + keyword + "', got '" + word + "'");
    return line;
}

} // namespace

void write_dataset(const PoseDataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    std::ostringstream header;
    header.precision(17);
    header << "POSEDATA 1\n";
    header << "joints " << dataset.joints << "\n";
    header << "names";
    for (const auto& n : dataset.joint_names) {
        if (n.empty() || n.find_first_of(" \t\n") != std::string::npos) throw DataError("joint names may not contain whitespace");
        header << ' ' << n;
    }
    header << "\ncameras " << dataset.cameras.size() << "\n";
    for (std::size_t i = 0; i < dataset.cameras.size(); ++i) {
        const auto& c = dataset.cameras[i];
        header << "camera " << i << ' ' << c.focal << ' ' << c.cx << ' ' << c.cy << ' ' << c.width << ' ' << c.height
               << "\n";
    }
    header << "sequences " << dataset.sequences.size() << "\n";
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
        const auto& s = dataset.sequences[i];
        header << "sequence " << i << ' ' << s.subject << ' ' << s.action << ' ' << s.camera << ' ' << s.frames << "\n";
    }
    header << "end\n";

    std::string bytes = header.str();
    for (const auto& s : dataset.sequences) {
        append_floats(bytes, s.keypoints_px);
        append_floats(bytes, s.joints_mm);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open dataset for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing dataset: " + path.string());
}

PoseDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open dataset: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    const auto end_marker = bytes.find("\nend\n");
    if (end_marker == std::string::npos) throw DataError("malformed dataset header: no 'end' line");
    const std::size_t payload_start = end_marker + 5;
    std::istringstream header(bytes.substr(0, payload_start));

    PoseDataset ds;
    {
        auto line = expect_line(header, "POSEDATA");
        if (parse_field<int>(line, "version") != 1) throw DataError("unsupported dataset version");
    }
    {
        auto line = expect_line(header, "joints");
        ds.joints = parse_field<std::size_t>(line, "joint count");
    }
    {
        auto line = expect_line(header, "names");
        for (std::string name; line >> name;) ds.joint_names.push_back(name);
        if (ds.joint_names.size() != ds.joints) {
            throw DataError("malformed dataset header: " + std::to_string(ds.joint_names.size()) + " names for " +
                            std::to_string(ds.joints) + " joints");
        }
    }
    std::size_t camera_count;
    {
        auto line = expect_line(header, "cameras");
        camera_count = parse_field<std::size_t>(line, "camera count");
    }
    for (std::size_t i = 0; i < camera_count; ++i) {
        auto line = expect_line(header, "camera");
        if (parse_field<std::size_t>(line, "camera index") != i) throw DataError("malformed dataset header: camera order");
        CameraSpec c;
        c.focal = parse_field<double>(line, "focal");
        c.cx = parse_field<double>(line, "cx");
        c.cy = parse_field<double>(line, "cy");
        c.width = parse_field<std::size_t>(line, "width");
        c.height = parse_field<std::size_t>(line, "height");
        ds.cameras.push_back(c);
    }
    std::size_t sequence_count;
    {
        auto line = expect_line(header, "sequences");
        sequence_count = parse_field<std::size_t>(line, "sequence count");
    }
    for (std::size_t i = 0; i < sequence_count; ++i) {
        auto line = expect_line(header, "sequence");
        if (parse_field<std::size_t>(line, "sequence index") != i) throw DataError("malformed dataset header: sequence order");
        PoseSequenceRecord s;
        s.subject = parse_field<std::uint32_t>(line, "subject");
        s.action = parse_field<std::uint32_t>(line, "action");
        s.camera = parse_field<std::uint32_t>(line, "camera");
        s.frames = parse_field<std::size_t>(line, "frame count");
        ds.sequences.push_back(std::move(s));
    }
    expect_line(header, "end");

    std::size_t expected = 0;
    for (const auto& s : ds.sequences) expected += s.frames * ds.joints * 5 * sizeof(float);
    const std::size_t available = bytes.size() - payload_start;
    if (available > expected) {
        throw DataError("dimension mismatch: blocks hold " + std::to_string(available) + " bytes but the header (J=" +
                        std::to_string(ds.joints) + ") implies " + std::to_string(expected));
    }

    std::size_t offset = payload_start;
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        auto& s = ds.sequences[i];
        const std::size_t n2 = s.frames * ds.joints * 2, n3 = s.frames * ds.joints * 3;
        for (auto [count, target] : {std::pair{n2, &s.keypoints_px}, std::pair{n3, &s.joints_mm}}) {
            const std::size_t need = count * sizeof(float);
            if (bytes.size() - offset < need) {
                throw DataError("dataset truncated: sequence " + std::to_string(i) + " block at byte offset " +
                                std::to_string(offset) + " needs " + std::to_string(need) + " bytes, " +
                                std::to_string(bytes.size() - offset) + " remain");
            }
            *target = read_floats(bytes, offset, count);
            offset += need;
        }
    }
    ds.validate();
    return ds;
}

std::vector<Window> extract_windows(const PoseDataset& dataset, std::size_t sequence, std::size_t frames,
                                    std::size_t root_index) {
    if (frames % 2 == 0) throw ConfigError("window length must be odd");
    const auto& seq = dataset.sequences.at(sequence);
    if (seq.frames == 0) throw DataError("cannot extract windows from an empty sequence");
    const std::size_t joints = dataset.joints;
    if (root_index >= joints) throw ConfigError("root joint index out of range");
    const auto& cam = dataset.cameras.at(seq.camera);
    const auto half = static_cast<std::ptrdiff_t>(frames / 2);
    const auto last = static_cast<std::ptrdiff_t>(seq.frames) - 1;

    std::vector<double> normalized(seq.frames * joints * 2);
    for (std::size_t k = 0; k < seq.frames * joints; ++k) {
        const Point2 n = normalize_coords({seq.keypoints_px[2 * k], seq.keypoints_px[2 * k + 1]},
                                          static_cast<double>(cam.width), static_cast<double>(cam.height));
        normalized[2 * k] = n.x;
        normalized[2 * k + 1] = n.y;
    }

    std::vector<Window> out;
    out.reserve(seq.frames);
    for (std::size_t f = 0; f < seq.frames; ++f) {
        std::vector<double> coords;
        coords.reserve(frames * joints * 2);
        for (std::ptrdiff_t dt = -half; dt <= half; ++dt) {
            const auto src = static_cast<std::size_t>(std::clamp(static_cast<std::ptrdiff_t>(f) + dt, std::ptrdiff_t{0}, last));
            const auto begin = normalized.begin() + static_cast<std::ptrdiff_t>(src * joints * 2);
            coords.insert(coords.end(), begin, begin + static_cast<std::ptrdiff_t>(joints * 2));
        }
        Pose3D target(joints);
        const double* p = seq.joints_mm.data() + f * joints * 3;
        for (std::size_t j = 0; j < joints; ++j)
            for (std::size_t a = 0; a < 3; ++a) target.at(j, a) = p[j * 3 + a] - p[root_index * 3 + a];
        out.push_back({PoseSequence2D(frames, joints, std::move(coords), root_index), std::move(target), sequence, f});
    }
    return out;
}

std::vector<Window> extract_all_windows(const PoseDataset& dataset, std::size_t frames, std::size_t root_index) {
    std::vector<Window> out;
    for (std::size_t s = 0; s < dataset.sequences.size(); ++s) {
        auto w = extract_windows(dataset, s, frames, root_index);
        std::move(w.begin(), w.end(), std::back_inserter(out));
    }
    return out;
}

SequenceSplit split_sequences(std::size_t count, double validation_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(seed);
    std::shuffle(order.begin(), order.end(), gen);
    std::size_t n_val = static_cast<std::size_t>(static_cast<double>(count) * validation_fraction + 0.5);
    if (count >= 2) n_val = std::clamp<std::size_t>(n_val, 1, count - 1);
    else n_val = 0;
    SequenceSplit split;
    split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

} // namespace poselift
