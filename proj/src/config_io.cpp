#include "poselift/config_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "poselift/errors.hpp"

namespace poselift {

namespace pt = boost::property_tree;

namespace {

// Shortest text that parses back to the same double.
std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string join(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::vector<std::size_t> split_indices(const std::string& text, const std::string& key) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto first = item.find_first_not_of(" \t");
        const auto last = item.find_last_not_of(" \t");
        if (first == std::string::npos) throw ConfigError("empty joint index in partition group '" + key + "'");
        item = item.substr(first, last - first + 1);
        if (item.find_first_not_of("0123456789") != std::string::npos) {
            throw ConfigError("partition group '" + key + "' has a bad joint index '" + item + "'");
        }
        out.push_back(std::stoul(item));
    }
    return out;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& path, T& target) {
    if (auto v = tree.get_optional<std::string>(path)) {
        try {
            target = tree.get<T>(path);
        } catch (const pt::ptree_error&) {
            throw ConfigError("config key '" + path + "' has invalid value '" + *v + "'");
        }
    }
}

void read_flag(const pt::ptree& tree, const std::string& path, bool& target) {
    if (auto v = tree.get_optional<std::string>(path)) {
        if (*v == "true" || *v == "1") target = true;
        else if (*v == "false" || *v == "0") target = false;
        else throw ConfigError("config key '" + path + "' must be true or false");
    }
}

void reject_unknown_keys(const pt::ptree& tree) {
    static const std::map<std::string, std::set<std::string>> known{
        {"run", {"profile", "seed", "validation_fraction"}},
        {"model",
         {"frames", "joints", "root_index", "feature_dim", "tcn_channels", "tcn_dropout", "hidden_dim",
          "dense_dropout", "leaky_slope", "bn_momentum", "bn_eps", "output_scale", "input_abs", "input_positional",
          "input_temporal", "temporal_op", "global_uses_positional"}},
        {"optimizer", {"beta1", "beta2", "eps", "weight_decay"}},
        {"stage1", {"epochs", "lr", "lr_decay", "batch_size"}},
        {"stage2", {"epochs", "lr", "lr_decay", "batch_size"}},
        {"stage3", {"epochs", "lr", "lr_decay", "batch_size"}},
    };
    for (const auto& [section, node] : tree) {
        if (section == "partition") continue;
        const auto it = known.find(section);
        if (it == known.end()) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : node) {
            if (!it->second.contains(key)) throw ConfigError("unknown config key '" + section + "." + key + "'");
        }
    }
}

} // namespace

RunConfig RunConfig::paper_defaults() {
    RunConfig c;
    c.model = ModelConfig::paper_defaults();
    for (int s = 1; s <= 3; ++s) c.stages[static_cast<std::size_t>(s - 1)] = StagePlan::paper_defaults(s);
    return c;
}

RunConfig parse_run_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    reject_unknown_keys(tree);
    const std::string profile = tree.get<std::string>("run.profile", "desk");
    RunConfig c;
    if (profile == "paper") c = RunConfig::paper_defaults();
    else if (profile != "desk") throw ConfigError("unknown profile '" + profile + "'");

    read(tree, "run.seed", c.seed);
    read(tree, "run.validation_fraction", c.validation_fraction);

    auto& m = c.model;
    read(tree, "model.frames", m.frames);
    read(tree, "model.joints", m.joints);
    read(tree, "model.root_index", m.root_index);
    read(tree, "model.feature_dim", m.feature_dim);
    read(tree, "model.tcn_channels", m.tcn_channels);
    read(tree, "model.tcn_dropout", m.tcn_dropout);
    read(tree, "model.hidden_dim", m.hidden_dim);
    read(tree, "model.dense_dropout", m.dense_dropout);
    read(tree, "model.leaky_slope", m.leaky_slope);
    read(tree, "model.bn_momentum", m.bn_momentum);
    read(tree, "model.bn_eps", m.bn_eps);
    read(tree, "model.output_scale", m.output_scale);
    read_flag(tree, "model.input_abs", m.flags.absolute);
    read_flag(tree, "model.input_positional", m.flags.positional);
    read_flag(tree, "model.input_temporal", m.flags.temporal);
    read_flag(tree, "model.global_uses_positional", m.global_uses_positional);
    if (auto op = tree.get_optional<std::string>("model.temporal_op")) m.temporal_op = TemporalOperator::parse(*op);

    if (auto part = tree.get_child_optional("partition")) {
        GroupPartition p;
        for (const auto& [name, node] : *part) {
            p.names.push_back(name);
            p.groups.push_back(split_indices(node.data(), name));
        }
        m.partition = std::move(p);
    }

    nn::AdamWHyper adam = c.stages[0].adam;
    read(tree, "optimizer.beta1", adam.beta1);
    read(tree, "optimizer.beta2", adam.beta2);
    read(tree, "optimizer.eps", adam.eps);
    read(tree, "optimizer.weight_decay", adam.weight_decay);
    for (int s = 1; s <= 3; ++s) {
        auto& plan = c.stages[static_cast<std::size_t>(s - 1)];
        const std::string sec = "stage" + std::to_string(s) + ".";
        read(tree, sec + "epochs", plan.epochs);
        read(tree, sec + "lr", plan.lr);
        read(tree, sec + "lr_decay", plan.lr_decay);
        read(tree, sec + "batch_size", plan.batch_size);
        plan.adam = adam;
        plan.validate();
    }
    m.validate();
    if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must lie in [0, 1)");
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& c) {
    std::ostringstream os;
    const auto& m = c.model;
    os << "[run]\n"
       << "seed = " << c.seed << "\n"
       << "validation_fraction = " << fmt(c.validation_fraction) << "\n\n";
    os << "[model]\n"
       << "frames = " << m.frames << "\n"
       << "joints = " << m.joints << "\n"
       << "root_index = " << m.root_index << "\n"
       << "feature_dim = " << m.feature_dim << "\n"
       << "tcn_channels = " << m.tcn_channels << "\n"
       << "tcn_dropout = " << fmt(m.tcn_dropout) << "\n"
       << "hidden_dim = " << m.hidden_dim << "\n"
       << "dense_dropout = " << fmt(m.dense_dropout) << "\n"
       << "leaky_slope = " << fmt(m.leaky_slope) << "\n"
       << "bn_momentum = " << fmt(m.bn_momentum) << "\n"
       << "bn_eps = " << fmt(m.bn_eps) << "\n"
       << "output_scale = " << fmt(m.output_scale) << "\n"
       << "input_abs = " << (m.flags.absolute ? "true" : "false") << "\n"
       << "input_positional = " << (m.flags.positional ? "true" : "false") << "\n"
       << "input_temporal = " << (m.flags.temporal ? "true" : "false") << "\n"
       << "temporal_op = " << m.temporal_op.name() << "\n"
       << "global_uses_positional = " << (m.global_uses_positional ? "true" : "false") << "\n\n";
    os << "[partition]\n";
    for (std::size_t g = 0; g < m.partition.size(); ++g) {
        os << m.partition.names[g] << " = " << join(m.partition.groups[g]) << "\n";
    }
    const auto& adam = c.stages[0].adam;
    os << "\n[optimizer]\n"
       << "beta1 = " << fmt(adam.beta1) << "\n"
       << "beta2 = " << fmt(adam.beta2) << "\n"
       << "eps = " << fmt(adam.eps) << "\n"
       << "weight_decay = " << fmt(adam.weight_decay) << "\n";
    for (const auto& plan : c.stages) {
        os << "\n[stage" << plan.stage << "]\n"
           << "epochs = " << plan.epochs << "\n"
           << "lr = " << fmt(plan.lr) << "\n"
           << "lr_decay = " << fmt(plan.lr_decay) << "\n"
           << "batch_size = " << plan.batch_size << "\n";
    }
    return os.str();
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write config snapshot: " + path.string());
    out << format_run_config(config);
}

void attach_run_config(nn::Checkpoint& checkpoint, const RunConfig& config) {
    std::istringstream text(format_run_config(config));
    std::string line;
    for (std::size_t n = 0; std::getline(text, line); ++n) {
        char key[32];
        std::snprintf(key, sizeof key, "run_config.%04zu", n);
        checkpoint.metadata[key] = line;
    }
}

RunConfig run_config_from_checkpoint(const nn::Checkpoint& checkpoint) {
    std::string text;
    // std::map keeps the zero-padded keys in line order.
    for (auto it = checkpoint.metadata.lower_bound("run_config."); it != checkpoint.metadata.end(); ++it) {
        if (!it->first.starts_with("run_config.")) break;
        text += it->second + "\n";
    }
    if (text.empty()) throw DataError("checkpoint carries no run configuration");
    return parse_run_config(text);
}

} // namespace poselift
