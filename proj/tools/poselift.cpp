// poselift command-line tool: dataset generation, staged training,
// evaluation and the two ablation experiments.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 data error, 4 numerical failure, 5 verify-freeze mismatch.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poselift/checkpoint.hpp"
#include "poselift/config_io.hpp"
#include "poselift/data.hpp"
#include "poselift/encoding.hpp"
#include "poselift/errors.hpp"
#include "poselift/evaluation.hpp"
#include "poselift/model.hpp"
#include "poselift/training.hpp"

namespace fs = std::filesystem;
using namespace poselift;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitMismatch = 5;

constexpr const char* kOutDirEnv = "POSELIFT_OUT_DIR";

struct VerificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

fs::path default_out_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? fs::path(env) : fs::path("poselift_out");
}

fs::path prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
}

// Resolved flags of a command, written as "<command>.ini" next to its outputs.
class Snapshot {
public:
    explicit Snapshot(std::string command) : command_(std::move(command)) {}
    Snapshot& set(const std::string& key, const std::string& value) {
        values_[key] = value;
        return *this;
    }
    Snapshot& set(const std::string& key, double value) { return set(key, num(value)); }
    void write(const fs::path& dir) const {
        std::ostringstream os;
        os << "[" << command_ << "]\n";
        for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
        write_text(dir / (command_ + ".ini"), os.str());
    }

private:
    std::string command_;
    std::map<std::string, std::string> values_;
};

std::string absolute_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

// Network rebuilt from a checkpoint that embeds its run configuration.
struct LoadedModel {
    RunConfig config;
    std::unique_ptr<FeatureFusionNetwork> network;
    CheckpointInfo info;
};

LoadedModel load_model(const fs::path& path) {
    const auto ck = nn::load_checkpoint(path);
    LoadedModel m;
    m.config = run_config_from_checkpoint(ck);
    m.info = checkpoint_info(ck);
    auto model = m.config.model;
    model.ffm_enabled = ck.meta("ffm_enabled") == "1";
    m.network = std::make_unique<FeatureFusionNetwork>(model, 0);
    std::vector<Component> parts;
    for (Component c : kAllComponents) {
        if (c != Component::Fusion || model.ffm_enabled) parts.push_back(c);
    }
    load_components(*m.network, ck, parts);
    return m;
}

PoseDataset load_matching_dataset(const fs::path& path, const ModelConfig& model) {
    auto ds = read_dataset(path);
    if (ds.joints != model.joints) {
        throw ConfigError("dataset has " + std::to_string(ds.joints) + " joints but the model expects " +
                          std::to_string(model.joints));
    }
    return ds;
}

std::vector<Window> windows_of(const PoseDataset& ds, const std::vector<std::size_t>& sequences,
                               const ModelConfig& model) {
    std::vector<Window> out;
    for (std::size_t s : sequences) {
        auto w = extract_windows(ds, s, model.frames, model.root_index);
        out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
    return out;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::uint64_t seed = 1;
    std::size_t frames = 243;
    std::size_t sequences = 20;
    double amplitude = 1.0;
    double noise = 0.0;
    std::size_t window = 27;
    std::string out;
};

int cmd_gen(const GenArgs& a) {
    if (a.window % 2 == 0) throw ConfigError("--window must be odd");
    const fs::path out = a.out.empty() ? prepare_dir(default_out_dir()) / "dataset.pld" : fs::path(a.out);
    const fs::path dir = out.has_parent_path() ? prepare_dir(out.parent_path()) : fs::path(".");

    SynthDatasetOptions o;
    o.sequences = a.sequences;
    o.frames = a.frames;
    o.amplitude = a.amplitude;
    o.pixel_noise = a.noise;
    const auto ds = synth_dataset(a.seed, o);
    write_dataset(ds, out);

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    const auto windows = extract_all_windows(ds, a.window);
    for (const auto& w : windows) {
        const double mr = movement_range(w.input);
        lo = std::min(lo, mr);
        hi = std::max(hi, mr);
        sum += mr;
    }
    std::cout << "wrote " << out.string() << "\n"
              << "joints " << ds.joints << ", sequences " << ds.sequences.size() << ", frames per sequence "
              << a.frames << ", total frames " << ds.total_frames() << "\n"
              << "movement range over " << a.window << "-frame windows: mean " << num(sum / windows.size())
              << ", min " << num(lo) << ", max " << num(hi) << "\n";

    Snapshot("gen")
        .set("seed", std::to_string(a.seed))
        .set("frames", std::to_string(a.frames))
        .set("sequences", std::to_string(a.sequences))
        .set("amplitude", a.amplitude)
        .set("noise", a.noise)
        .set("window", std::to_string(a.window))
        .set("out", absolute_string(out))
        .write(dir);
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::string data;
    std::string stage = "all";
    std::string resume;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
    std::vector<int> stages;
    if (a.stage == "all") stages = {1, 2, 3};
    else if (a.stage == "1" || a.stage == "2" || a.stage == "3") stages = {a.stage[0] - '0'};
    else throw ConfigError("--stage must be 1, 2, 3 or all");

    std::optional<nn::Checkpoint> previous;
    if (!a.resume.empty()) previous = nn::load_checkpoint(a.resume);

    RunConfig cfg;
    if (!a.config.empty()) cfg = load_run_config(a.config);
    else if (previous) cfg = run_config_from_checkpoint(*previous);
    if (a.seed) cfg.seed = *a.seed;

    const fs::path dir = prepare_dir(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
    save_run_config(cfg, dir / "train.ini");

    const auto ds = load_matching_dataset(a.data, cfg.model);
    const auto split = split_sequences(ds.sequences.size(), cfg.validation_fraction, cfg.seed);
    const auto train = TrainingSet::from_windows(cfg.model, windows_of(ds, split.train, cfg.model));
    const auto val = TrainingSet::from_windows(cfg.model, windows_of(ds, split.validation, cfg.model));
    std::cout << "training windows " << train.size() << ", validation windows " << val.size() << "\n";

    std::string csv = metrics_csv_header();
    for (int s : stages) {
        const auto& plan = cfg.stages[static_cast<std::size_t>(s - 1)];
        auto result = run_stage(cfg.model, plan, previous ? &*previous : nullptr, train,
                                val.size() ? &val : nullptr, cfg.seed, [](const EpochMetrics& m) {
                                    std::cout << "stage " << m.stage << " epoch " << m.epoch << " lr " << num(m.lr)
                                              << " loss " << num(m.train_loss) << " val_mpjpe "
                                              << num(m.val_mpjpe) << std::endl;
                                });
        for (const auto& m : result.metrics) csv += metrics_csv_row(m);
        attach_run_config(result.checkpoint, cfg);
        const auto path = dir / ("stage" + std::to_string(s) + ".ckpt");
        nn::save_checkpoint(result.checkpoint, path);
        std::cout << "wrote " << path.string() << "\n";
        previous = std::move(result.checkpoint);
    }
    write_text(dir / "metrics.csv", csv);
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string protocol = "both";
    std::string out_dir;
};

int cmd_eval(const EvalArgs& a) {
    const bool p1 = a.protocol == "1" || a.protocol == "both";
    const bool p2 = a.protocol == "2" || a.protocol == "both";
    if (!p1 && !p2) throw ConfigError("--protocol must be 1, 2 or both");

    auto m = load_model(a.ckpt);
    const auto ds = load_matching_dataset(a.data, m.config.model);
    const fs::path dir = prepare_dir(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));

    std::string csv = "sequence,windows";
    if (p1) csv += ",mpjpe";
    if (p2) csv += ",p_mpjpe";
    csv += "\n";
    std::vector<Pose3D> all_pred, all_gt;
    for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
        const auto windows = extract_windows(ds, s, m.config.model.frames, m.config.model.root_index);
        auto pred = predict_windows(*m.network, windows);
        std::vector<Pose3D> gt;
        for (const auto& w : windows) gt.push_back(w.target);
        csv += std::to_string(s) + "," + std::to_string(windows.size());
        if (p1) csv += "," + num(mpjpe(pred, gt));
        if (p2) csv += "," + num(p_mpjpe(pred, gt));
        csv += "\n";
        all_pred.insert(all_pred.end(), pred.begin(), pred.end());
        all_gt.insert(all_gt.end(), gt.begin(), gt.end());
    }
    csv += "average," + std::to_string(all_pred.size());
    std::cout << "windows " << all_pred.size();
    if (p1) {
        const double v = mpjpe(all_pred, all_gt);
        csv += "," + num(v);
        std::cout << ", MPJPE " << num(v) << " mm";
    }
    if (p2) {
        const double v = p_mpjpe(all_pred, all_gt);
        csv += "," + num(v);
        std::cout << ", P-MPJPE " << num(v) << " mm";
    }
    csv += "\n";
    std::cout << "\n";
    write_text(dir / "eval.csv", csv);
    Snapshot("eval")
        .set("ckpt", absolute_string(a.ckpt))
        .set("data", absolute_string(a.data))
        .set("protocol", a.protocol)
        .write(dir);
    return 0;
}

// ---------------------------------------------------------------- robustness

struct RobustnessArgs {
    std::string ckpt;
    std::string data;
    std::size_t offsets = 6;
    double a = 0.2;
    std::uint64_t seed = 1;
    std::string out_dir;
};

int cmd_robustness(const RobustnessArgs& a) {
    if (!(a.a > 0.0)) throw ConfigError("--a must be positive");
    auto m = load_model(a.ckpt);
    const auto ds = load_matching_dataset(a.data, m.config.model);
    const fs::path dir = prepare_dir(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));

    std::vector<OffsetVector> offsets{{0.0, 0.0}};
    for (const auto& o : sample_offsets(a.offsets, a.a, a.seed)) offsets.push_back(o);
    const auto windows = extract_all_windows(ds, m.config.model.frames, m.config.model.root_index);
    const auto rows = shift_experiment(*m.network, windows, offsets);

    std::string csv = "dx,dy,magnitude,err_vs_gt,consistency,skipped\n";
    for (const auto& r : rows) {
        csv += num(r.offset.dx) + "," + num(r.offset.dy) + "," + num(r.offset.magnitude()) + "," +
               num(r.error_vs_gt) + "," + num(r.consistency) + "," + std::to_string(r.skipped) + "\n";
    }
    std::cout << csv;
    write_text(dir / "robustness.csv", csv);
    Snapshot("robustness")
        .set("ckpt", absolute_string(a.ckpt))
        .set("data", absolute_string(a.data))
        .set("offsets", std::to_string(a.offsets))
        .set("a", a.a)
        .set("seed", std::to_string(a.seed))
        .write(dir);
    return 0;
}

// ---------------------------------------------------------------- mr

struct MrArgs {
    std::string ckpt;
    std::string ckpt_b;
    std::string data;
    std::size_t bins = 10;
    std::string out_dir;
};

int cmd_mr(const MrArgs& a) {
    auto m = load_model(a.ckpt);
    const auto ds = load_matching_dataset(a.data, m.config.model);
    const fs::path dir = prepare_dir(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
    const auto windows = extract_all_windows(ds, m.config.model.frames, m.config.model.root_index);

    std::vector<double> mr;
    std::vector<Pose3D> gt;
    for (const auto& w : windows) {
        mr.push_back(movement_range(w.input));
        gt.push_back(w.target);
    }
    const auto subsets = mr_stratify(mr, predict_windows(*m.network, windows), gt, a.bins);
    std::optional<std::vector<MRSubset>> other;
    if (!a.ckpt_b.empty()) {
        auto b = load_model(a.ckpt_b);
        if (b.config.model.frames != m.config.model.frames || b.config.model.root_index != m.config.model.root_index)
            throw ConfigError("--ckpt-b uses a different window length or root joint");
        other = mr_stratify(mr, predict_windows(*b.network, windows), gt, a.bins);
    }

    std::string csv = "bin,mr_min,mr_max,count,mpjpe";
    if (other) csv += ",mpjpe_b,delta";
    csv += "\n";
    for (std::size_t k = 0; k < subsets.size(); ++k) {
        const auto& s = subsets[k];
        csv += std::to_string(s.id) + "," + num(s.mr_min) + "," + num(s.mr_max) + "," +
               std::to_string(s.members.size()) + "," + num(s.mpjpe);
        if (other) csv += "," + num((*other)[k].mpjpe) + "," + num((*other)[k].mpjpe - s.mpjpe);
        csv += "\n";
    }
    std::cout << csv;
    write_text(dir / "mr.csv", csv);
    Snapshot snap("mr");
    snap.set("ckpt", absolute_string(a.ckpt)).set("data", absolute_string(a.data)).set("bins", std::to_string(a.bins));
    if (other) snap.set("ckpt_b", absolute_string(a.ckpt_b));
    snap.write(dir);
    return 0;
}

// ---------------------------------------------------------------- encode

struct EncodeArgs {
    std::string data;
    std::size_t window = 0;
    std::size_t frames = 27;
    std::string op = "SUB";
    std::string shift;
    std::string out;
};

OffsetVector parse_shift(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw ConfigError("--shift expects dx,dy");
    try {
        std::size_t used = 0;
        const double dx = std::stod(text.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument("dx");
        const std::string rest = text.substr(comma + 1);
        const double dy = std::stod(rest, &used);
        if (used != rest.size()) throw std::invalid_argument("dy");
        return {dx, dy};
    } catch (const std::logic_error&) {
        throw ConfigError("--shift expects dx,dy, got '" + text + "'");
    }
}

int cmd_encode(const EncodeArgs& a) {
    const auto op = TemporalOperator::parse(a.op);
    const auto ds = read_dataset(a.data);
    const auto windows = extract_all_windows(ds, a.frames);
    if (a.window >= windows.size()) {
        throw ConfigError("window " + std::to_string(a.window) + " out of range, the dataset has " +
                          std::to_string(windows.size()));
    }
    PoseSequence2D seq = windows[a.window].input;
    if (!a.shift.empty()) {
        const auto o = parse_shift(a.shift);
        seq = seq.shifted(o.dx, o.dy);
    }
    const auto kp = positional_encode(seq);
    const auto kt = temporal_encode(seq, op);
    const std::size_t c = op.channels();

    std::ostringstream os;
    os << "frame,joint,kp_x,kp_y";
    for (std::size_t k = 0; k < c; ++k) os << ",kt_" << k;
    os << "\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
    };
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t j = 0; j < seq.joints(); ++j) {
            os << t << "," << j;
            const std::size_t i = t * seq.joints() + j;
            put(kp[i * 2]);
            put(kp[i * 2 + 1]);
            for (std::size_t k = 0; k < c; ++k) put(kt[i * c + k]);
            os << "\n";
        }
    }
    if (a.out.empty()) {
        std::cout << os.str();
        return 0;
    }
    const fs::path out(a.out);
    const fs::path dir = out.has_parent_path() ? prepare_dir(out.parent_path()) : fs::path(".");
    write_text(out, os.str());
    Snapshot("encode")
        .set("data", absolute_string(a.data))
        .set("window", std::to_string(a.window))
        .set("frames", std::to_string(a.frames))
        .set("op", op.name())
        .set("shift", a.shift.empty() ? "0,0" : a.shift)
        .set("out", absolute_string(out))
        .write(dir);
    return 0;
}

// ---------------------------------------------------------------- verify-freeze

struct VerifyArgs {
    std::string before;
    std::string after;
    std::vector<std::string> components{"local", "global"};
};

Component parse_component(const std::string& name) {
    for (Component c : kAllComponents) {
        if (component_name(c) == name) return c;
    }
    throw ConfigError("unknown component '" + name + "' (expected local, global, fusion or decoder)");
}

int cmd_verify_freeze(const VerifyArgs& a) {
    const auto before = nn::load_checkpoint(a.before);
    const auto after = nn::load_checkpoint(a.after);
    if (checkpoint_info(before).config_hash != checkpoint_info(after).config_hash)
        throw ConfigError("checkpoints were written for different model configurations");
    bool ok = true;
    for (const auto& name : a.components) {
        const Component c = parse_component(name);
        const auto fb = component_fingerprint(before, c);
        const auto fa = component_fingerprint(after, c);
        const bool same = fb == fa;
        ok = ok && same;
        char line[160];
        std::snprintf(line, sizeof line, "%-8s %016llx %016llx %s\n", name.c_str(), static_cast<unsigned long long>(fb),
                      static_cast<unsigned long long>(fa), same ? "unchanged" : "CHANGED");
        std::cout << line;
    }
    if (!ok) throw VerificationFailure("frozen components changed between the checkpoints");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"poselift: 2D-to-3D pose lifting with enhanced inputs and feature fusion"};
    app.require_subcommand(1);
    app.footer(std::string("Outputs default to $") + kOutDirEnv +
               " (or ./poselift_out).\nExit codes: 0 ok, 1 unexpected failure, 2 config/usage, 3 data, "
               "4 numerical, 5 verify-freeze mismatch.");

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
    g->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
    g->add_option("--frames", gen.frames, "frames per sequence")->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--sequences", gen.sequences, "number of sequences")->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--amplitude", gen.amplitude, "motion amplitude, 0 is static")->capture_default_str()->check(CLI::NonNegativeNumber);
    g->add_option("--noise", gen.noise, "Gaussian pixel jitter (px)")->capture_default_str()->check(CLI::NonNegativeNumber);
    g->add_option("--window", gen.window, "window length for the movement-range summary")->capture_default_str();
    g->add_option("--out", gen.out, "dataset path (default <out dir>/dataset.pld)");

    TrainArgs train;
    std::uint64_t train_seed = 0;
    auto* t = app.add_subcommand("train", "run the staged training schedule");
    t->add_option("--config", train.config, "run config (INI); default desk profile or the --resume config");
    t->add_option("--data", train.data, "dataset file")->required();
    t->add_option("--stage", train.stage, "1, 2, 3 or all")->capture_default_str();
    t->add_option("--resume", train.resume, "checkpoint of the previous stage");
    t->add_option("--out", train.out_dir, "output directory");
    auto* seed_opt = t->add_option("--seed", train_seed, "override the config seed");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "MPJPE and P-MPJPE per sequence");
    e->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
    e->add_option("--data", ev.data, "dataset file")->required();
    e->add_option("--protocol", ev.protocol, "1, 2 or both")->capture_default_str();
    e->add_option("--out", ev.out_dir, "output directory");

    RobustnessArgs rob;
    auto* r = app.add_subcommand("robustness", "consistency under global 2D offsets");
    r->add_option("--ckpt", rob.ckpt, "checkpoint")->required();
    r->add_option("--data", rob.data, "dataset file")->required();
    r->add_option("--offsets", rob.offsets, "number of random offsets")->capture_default_str();
    r->add_option("--a", rob.a, "offset components uniform in (-a, a)")->capture_default_str();
    r->add_option("--seed", rob.seed, "offset seed")->capture_default_str();
    r->add_option("--out", rob.out_dir, "output directory");

    MrArgs mr;
    auto* m = app.add_subcommand("mr", "error stratified by movement range");
    m->add_option("--ckpt", mr.ckpt, "checkpoint")->required();
    m->add_option("--ckpt-b", mr.ckpt_b, "second checkpoint, adds mpjpe_b and delta = b - a");
    m->add_option("--data", mr.data, "dataset file")->required();
    m->add_option("--bins", mr.bins, "number of equal-count subsets")->capture_default_str()->check(CLI::PositiveNumber);
    m->add_option("--out", mr.out_dir, "output directory");

    EncodeArgs enc;
    auto* en = app.add_subcommand("encode", "dump the positional and temporal encodings of one window");
    en->add_option("--data", enc.data, "dataset file")->required();
    en->add_option("--window", enc.window, "window index over all sequences")->capture_default_str();
    en->add_option("--frames", enc.frames, "window length")->capture_default_str();
    en->add_option("--op", enc.op, "SUB, IP, CP, CS, SUB+SUB_S or SUB(<n>f)")->capture_default_str();
    en->add_option("--shift", enc.shift, "global offset dx,dy applied before encoding");
    en->add_option("--out", enc.out, "CSV path (default stdout)");

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify-freeze", "check that components are unchanged between checkpoints");
    v->add_option("--before", ver.before, "earlier checkpoint")->required();
    v->add_option("--after", ver.after, "later checkpoint")->required();
    v->add_option("--components", ver.components, "local, global, fusion, decoder")->delimiter(',')->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitConfig;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*t) {
            if (*seed_opt) train.seed = train_seed;
            return cmd_train(train);
        }
        if (*e) return cmd_eval(ev);
        if (*r) return cmd_robustness(rob);
        if (*m) return cmd_mr(mr);
        if (*en) return cmd_encode(enc);
        if (*v) return cmd_verify_freeze(ver);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const DataError& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return kExitData;
    } catch (const NumericalError& ex) {
        std::cerr << "numerical error: " << ex.what() << "\n";
        return kExitNumerical;
    } catch (const VerificationFailure& ex) {
        std::cerr << ex.what() << "\n";
        return kExitMismatch;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
