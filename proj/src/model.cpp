#include "poselift/model.hpp"

#include <algorithm>
#include <sstream>

#include "poselift/errors.hpp"
#include "poselift/hash.hpp"

namespace poselift {

using nn::Mode;
using nn::Tensor;

void GroupPartition::validate(std::size_t joints) const {
    if (groups.empty()) throw ConfigError("partition has no groups");
    if (names.size() != groups.size()) throw ConfigError("partition needs one name per group");
    std::vector<int> seen(joints, 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw ConfigError("partition group '" + names[g] + "' is empty");
        for (auto j : groups[g]) {
            if (j >= joints) throw ConfigError("partition group '" + names[g] + "' names joint " + std::to_string(j));
            if (seen[j]++) throw ConfigError("joint " + std::to_string(j) + " appears in more than one group");
        }
    }
    for (std::size_t j = 0; j < joints; ++j) {
        if (!seen[j]) throw ConfigError("joint " + std::to_string(j) + " is not assigned to a group");
    }
}

GroupPartition GroupPartition::default17() {
    return {{"torso", "left_arm", "right_arm", "left_leg", "right_leg"},
            {{0, 7, 8, 9, 10}, {11, 12, 13}, {14, 15, 16}, {4, 5, 6}, {1, 2, 3}}};
}

ModelConfig ModelConfig::desk_profile() {
    ModelConfig c;
    c.frames = 27;
    c.feature_dim = 64;
    c.tcn_channels = 64;
    c.hidden_dim = 128;
    return c;
}

std::size_t ModelConfig::tcn_depth() const {
    std::size_t depth = 0, span = 1;
    while (span < frames) {
        span *= 3;
        ++depth;
    }
    if (span != frames || depth == 0) {
        throw ConfigError("sequence length " + std::to_string(frames) +
                          " is not a power of three; the temporal encoder cannot match its receptive field");
    }
    return depth;
}

void ModelConfig::validate() const {
    tcn_depth();
    if (root_index >= joints) throw ConfigError("root joint index out of range");
    partition.validate(joints);
    if (feature_dim == 0 || tcn_channels == 0 || hidden_dim == 0) throw ConfigError("layer widths must be positive");
    if (tcn_dropout < 0.0 || tcn_dropout >= 1.0 || dense_dropout < 0.0 || dense_dropout >= 1.0) {
        throw ConfigError("dropout rates must lie in [0, 1)");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky slope must lie in (0, 1)");
    if (channel_count(flags, temporal_op) == 0) throw ConfigError("input needs at least one channel block");
    if (temporal_op.kind == TemporalKind::SubWindowed && flags.temporal &&
        (temporal_op.window > frames || temporal_op.window % 2 == 0)) {
        throw ConfigError("windowed subtraction needs an odd window no longer than the sequence");
    }
}

std::uint64_t ModelConfig::architecture_hash() const {
    std::ostringstream os;
    os.precision(17);
    os << "frames=" << frames << ";joints=" << joints << ";root=" << root_index << ";groups=";
    for (std::size_t g = 0; g < partition.size(); ++g) {
        os << partition.names[g] << ':';
        for (auto j : partition.groups[g]) os << j << ',';
        os << '|';
    }
    os << ";feature=" << feature_dim << ";tcn=" << tcn_channels << ";hidden=" << hidden_dim
       << ";abs=" << flags.absolute << ";pos=" << flags.positional << ";temporal=" << flags.temporal
       << ";op=" << temporal_op.name() << ";global_pos=" << global_uses_positional << ";scale=" << output_scale;
    Fnv1a h;
    h.update(os.str());
    return h.digest();
}

std::string component_name(Component c) {
    switch (c) {
    case Component::LocalEncoder:
        return "local";
    case Component::GlobalEncoder:
        return "global";
    case Component::Fusion:
        return "fusion";
    case Component::Decoder:
        return "decoder";
    }
    return "?";
}

ModelInput prepare_input(const ModelConfig& config, const PoseSequence2D& seq) {
    if (seq.frames() != config.frames || seq.joints() != config.joints) {
        throw ConfigError("window is " + std::to_string(seq.frames()) + "x" + std::to_string(seq.joints()) +
                          " but the model expects " + std::to_string(config.frames) + "x" +
                          std::to_string(config.joints));
    }
    ModelInput in;
    in.enhanced = assemble_input(seq, config.flags, config.temporal_op);
    const std::size_t c = seq.center_index(), root = seq.root_index();
    in.global.resize(config.joints * 2);
    for (std::size_t j = 0; j < config.joints; ++j) {
        if (config.global_uses_positional) {
            in.global[2 * j] = seq.x(c, j) - seq.x(c, root);
            in.global[2 * j + 1] = seq.y(c, j) - seq.y(c, root);
        } else {
            in.global[2 * j] = seq.x(c, j);
            in.global[2 * j + 1] = seq.y(c, j);
        }
    }
    return in;
}

DenseBlock::DenseBlock(std::size_t in, std::size_t hidden, std::size_t out, const ModelConfig& config,
                       std::mt19937_64& gen)
    : input_(in, hidden, gen),
      input_bn_(hidden, config.bn_momentum, config.bn_eps),
      first_(hidden, hidden, gen),
      first_bn_(hidden, config.bn_momentum, config.bn_eps),
      second_(hidden, hidden, gen),
      second_bn_(hidden, config.bn_momentum, config.bn_eps),
      output_(hidden, out, gen),
      slope_(config.leaky_slope),
      dropout_(config.dense_dropout) {}

Tensor DenseBlock::stage(const nn::Linear& lin, nn::BatchNorm& bn, const Tensor& x, nn::ForwardContext& ctx,
                         Mode mode) {
    Tensor h = nn::leaky_relu(bn(lin(x), mode), slope_);
    return nn::dropout(h, dropout_, mode, ctx.rng, ctx.take_stream());
}

Tensor DenseBlock::operator()(const Tensor& x, nn::ForwardContext& ctx, Mode mode) {
    Tensor h = stage(input_, input_bn_, x, ctx, mode);
    Tensor r = stage(first_, first_bn_, h, ctx, mode);
    r = stage(second_, second_bn_, r, ctx, mode);
    return output_(nn::add(h, r));
}

void DenseBlock::collect(const std::string& prefix, nn::TensorRegistry& out) const {
    input_.collect(prefix + ".in", out);
    input_bn_.collect(prefix + ".in_bn", out);
    first_.collect(prefix + ".res1", out);
    first_bn_.collect(prefix + ".res1_bn", out);
    second_.collect(prefix + ".res2", out);
    second_bn_.collect(prefix + ".res2_bn", out);
    output_.collect(prefix + ".out", out);
}

TemporalEncoder::TemporalEncoder(std::size_t in_channels, const ModelConfig& config, std::mt19937_64& gen)
    : expand_(in_channels, config.tcn_channels, 1, 1, gen),
      expand_bn_(config.tcn_channels, config.bn_momentum, config.bn_eps),
      slope_(config.leaky_slope),
      dropout_(config.tcn_dropout) {
    const std::size_t depth = config.tcn_depth();
    std::size_t dilation = 1;
    for (std::size_t l = 0; l < depth; ++l, dilation *= 3) {
        Block b;
        b.dilated = nn::Conv1d(config.tcn_channels, config.tcn_channels, 3, dilation, gen);
        b.dilated_bn = nn::BatchNorm(config.tcn_channels, config.bn_momentum, config.bn_eps);
        b.pointwise = nn::Conv1d(config.tcn_channels, config.tcn_channels, 1, 1, gen);
        b.pointwise_bn = nn::BatchNorm(config.tcn_channels, config.bn_momentum, config.bn_eps);
        blocks_.push_back(std::move(b));
    }
    project_ = nn::Linear(config.tcn_channels, config.feature_dim, gen);
    if (receptive_field() != config.frames) throw ConfigError("temporal encoder receptive field does not match T");
}

std::size_t TemporalEncoder::receptive_field() const {
    std::size_t field = 1;
    for (const auto& b : blocks_) field += b.dilated.receptive_field() - 1;
    return field;
}

Tensor TemporalEncoder::operator()(const Tensor& x, nn::ForwardContext& ctx, Mode mode) {
    auto act_drop = [&](const Tensor& t) {
        return nn::dropout(nn::leaky_relu(t, slope_), dropout_, mode, ctx.rng, ctx.take_stream());
    };
    Tensor h = act_drop(expand_bn_(expand_(x), mode));
    for (auto& b : blocks_) {
        Tensor r = act_drop(b.dilated_bn(b.dilated(h), mode));
        r = act_drop(b.pointwise_bn(b.pointwise(r), mode));
        const std::size_t trim = (h.dim(0) - r.dim(0)) / 2;
        h = nn::add(nn::slice_leading(h, trim, r.dim(0)), r);
    }
    // A single time step remains.
    return project_(nn::reshape(h, {h.dim(1), h.dim(2)}));
}

void TemporalEncoder::collect(const std::string& prefix, nn::TensorRegistry& out) const {
    expand_.collect(prefix + ".expand", out);
    expand_bn_.collect(prefix + ".expand_bn", out);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string p = prefix + ".block" + std::to_string(l);
        blocks_[l].dilated.collect(p + ".dilated", out);
        blocks_[l].dilated_bn.collect(p + ".dilated_bn", out);
        blocks_[l].pointwise.collect(p + ".pointwise", out);
        blocks_[l].pointwise_bn.collect(p + ".pointwise_bn", out);
    }
    project_.collect(prefix + ".project", out);
}

FeatureFusionNetwork::FeatureFusionNetwork(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
    config_.validate();
    const std::size_t groups = config_.partition.size();
    const std::size_t channels = channel_count(config_.flags, config_.temporal_op);
    const std::size_t d = config_.feature_dim;

    // Each component draws from its own generator so that enabling the FFM
    // does not change the initialization of the other components.
    std::mt19937_64 local_gen(derive_seed(init_seed, 1));
    std::mt19937_64 global_gen(derive_seed(init_seed, 2));
    std::mt19937_64 fusion_gen(derive_seed(init_seed, 3));
    std::mt19937_64 decoder_gen(derive_seed(init_seed, 4));

    for (std::size_t g = 0; g < groups; ++g) {
        local_.emplace_back(config_.partition.groups[g].size() * channels, config_, local_gen);
    }
    global_ = DenseBlock(config_.joints * 2, config_.hidden_dim, d, config_, global_gen);
    if (config_.ffm_enabled) fusion_.emplace((groups - 1) * d, config_.hidden_dim, d, config_, fusion_gen);
    const std::size_t decoder_in = (config_.ffm_enabled ? 3 : 2) * d;
    for (std::size_t g = 0; g < groups; ++g) {
        decoders_.emplace_back(decoder_in, config_.hidden_dim, 3 * config_.partition.groups[g].size(), config_,
                               decoder_gen);
    }

    // Decoder heads are concatenated in group order; map back to joint order.
    output_columns_.assign(config_.joints * 3, nn::kZeroColumn);
    std::size_t col = 0;
    for (const auto& group : config_.partition.groups) {
        for (auto j : group) {
            for (std::size_t a = 0; a < 3; ++a, ++col) {
                if (j != config_.root_index) output_columns_[j * 3 + a] = col;
            }
        }
    }
}

NetworkBatch FeatureFusionNetwork::make_batch(std::span<const ModelInput* const> inputs) const {
    if (inputs.empty()) throw ConfigError("empty batch");
    const std::size_t batch = inputs.size(), frames = config_.frames;
    const std::size_t channels = channel_count(config_.flags, config_.temporal_op);
    for (const auto* in : inputs) {
        if (in->enhanced.frames != frames || in->enhanced.joints != config_.joints ||
            in->enhanced.channels != channels || in->enhanced.flags != config_.flags) {
            throw ConfigError("input does not match the model configuration");
        }
    }
    NetworkBatch out;
    out.size = batch;
    for (const auto& group : config_.partition.groups) {
        const std::size_t width = group.size() * channels;
        std::vector<double> values(frames * batch * width);
        for (std::size_t t = 0; t < frames; ++t) {
            for (std::size_t b = 0; b < batch; ++b) {
                double* dst = values.data() + (t * batch + b) * width;
                const auto& enh = inputs[b]->enhanced;
                for (auto j : group) {
                    const double* src = enh.values.data() + (t * enh.joints + j) * channels;
                    dst = std::copy(src, src + channels, dst);
                }
            }
        }
        out.group_inputs.push_back(Tensor::from({frames, batch, width}, std::move(values)));
    }
    std::vector<double> global;
    global.reserve(batch * config_.joints * 2);
    for (const auto* in : inputs) global.insert(global.end(), in->global.begin(), in->global.end());
    out.global_input = Tensor::from({batch, config_.joints * 2}, std::move(global));
    return out;
}

Mode FeatureFusionNetwork::mode_for(Component c, const nn::ForwardContext& ctx) const {
    return frozen(c) ? Mode::Eval : ctx.mode;
}

Tensor FeatureFusionNetwork::local_encode(std::size_t group, const Tensor& input, nn::ForwardContext& ctx) {
    const std::size_t expected = config_.partition.groups.at(group).size() * channel_count(config_.flags, config_.temporal_op);
    if (input.ndim() != 3 || input.dim(0) != config_.frames || input.dim(2) != expected) {
        throw ConfigError("local encoder " + std::to_string(group) + " expects [" + std::to_string(config_.frames) +
                          ", B, " + std::to_string(expected) + "], got " + nn::shape_string(input.shape()));
    }
    return local_[group](input, ctx, mode_for(Component::LocalEncoder, ctx));
}

Tensor FeatureFusionNetwork::global_encode(const Tensor& input, nn::ForwardContext& ctx) {
    return global_(input, ctx, mode_for(Component::GlobalEncoder, ctx));
}

Tensor FeatureFusionNetwork::fuse(std::size_t group, const std::vector<Tensor>& others, nn::ForwardContext& ctx) {
    if (!fusion_) throw ConfigError("fusion block is not present when the FFM is disabled");
    if (group >= config_.partition.size()) throw ConfigError("group index out of range");
    if (others.size() + 1 != config_.partition.size()) {
        throw ConfigError("fusion expects " + std::to_string(config_.partition.size() - 1) + " feature vectors, got " +
                          std::to_string(others.size()));
    }
    return (*fusion_)(nn::concat_last(others), ctx, mode_for(Component::Fusion, ctx));
}

Tensor FeatureFusionNetwork::decode(std::size_t group, const Tensor& local, const std::optional<Tensor>& fused,
                                    const Tensor& global, nn::ForwardContext& ctx) {
    if (fused.has_value() != config_.ffm_enabled) {
        throw ConfigError(config_.ffm_enabled ? "decoder needs fused features when the FFM is enabled"
                                              : "fused features given to a decoder built without the FFM");
    }
    Tensor joined = fused ? nn::concat_last({local, *fused, global}) : nn::concat_last({local, global});
    return decoders_.at(group)(joined, ctx, mode_for(Component::Decoder, ctx));
}

NetworkFeatures FeatureFusionNetwork::encode(const NetworkBatch& batch, nn::ForwardContext& ctx) {
    NetworkFeatures f;
    for (std::size_t g = 0; g < local_.size(); ++g) f.local.push_back(local_encode(g, batch.group_inputs[g], ctx));
    f.global = global_encode(batch.global_input, ctx);
    if (config_.ffm_enabled) {
        for (std::size_t g = 0; g < local_.size(); ++g) {
            std::vector<Tensor> others;
            for (std::size_t n = 0; n < local_.size(); ++n) {
                if (n != g) others.push_back(f.local[n]);
            }
            f.fused.push_back(fuse(g, others, ctx));
        }
    }
    return f;
}

Tensor FeatureFusionNetwork::forward(const NetworkBatch& batch, nn::ForwardContext& ctx) {
    NetworkFeatures f = encode(batch, ctx);
    std::vector<Tensor> heads;
    for (std::size_t g = 0; g < local_.size(); ++g) {
        std::optional<Tensor> fused;
        if (config_.ffm_enabled) fused = f.fused[g];
        heads.push_back(decode(g, f.local[g], fused, f.global, ctx));
    }
    Tensor joined = nn::scale(nn::concat_last(heads), config_.output_scale);
    return nn::select_columns(joined, output_columns_);
}

Pose3D FeatureFusionNetwork::predict(const PoseSequence2D& seq) {
    const ModelInput in = prepare_input(config_, seq);
    return predict(std::span(&in, 1)).front();
}

std::vector<Pose3D> FeatureFusionNetwork::predict(std::span<const ModelInput> inputs, std::size_t batch_size) {
    nn::NoGradGuard no_grad;
    std::vector<Pose3D> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, inputs.size() - start);
        std::vector<const ModelInput*> ptrs;
        for (std::size_t k = 0; k < n; ++k) ptrs.push_back(&inputs[start + k]);
        nn::ForwardContext ctx{Mode::Eval};
        const Tensor y = forward(make_batch(ptrs), ctx);
        const std::size_t width = config_.joints * 3;
        for (std::size_t k = 0; k < n; ++k) {
            out.emplace_back(config_.joints, std::vector<double>(y.data().begin() + static_cast<std::ptrdiff_t>(k * width),
                                                                y.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * width)));
        }
    }
    return out;
}

void FeatureFusionNetwork::set_frozen(Component c, bool frozen_flag) {
    frozen_[static_cast<std::size_t>(c)] = frozen_flag;
    for (auto& p : registry(c).parameters) p.tensor.set_requires_grad(!frozen_flag);
}

bool FeatureFusionNetwork::frozen(Component c) const { return frozen_[static_cast<std::size_t>(c)]; }

nn::TensorRegistry FeatureFusionNetwork::registry() const {
    nn::TensorRegistry out;
    for (std::size_t g = 0; g < local_.size(); ++g) local_[g].collect("local." + std::to_string(g), out);
    global_.collect("global", out);
    if (fusion_) fusion_->collect("fusion", out);
    for (std::size_t g = 0; g < decoders_.size(); ++g) decoders_[g].collect("decoder." + std::to_string(g), out);
    return out;
}

nn::TensorRegistry FeatureFusionNetwork::registry(Component c) const {
    nn::TensorRegistry all = registry(), out;
    for (auto& p : all.parameters)
        if (component_of(p.name) == c) out.parameters.push_back(p);
    for (auto& b : all.buffers)
        if (component_of(b.name) == c) out.buffers.push_back(b);
    return out;
}

std::vector<Tensor> FeatureFusionNetwork::trainable_parameters() const {
    std::vector<Tensor> out;
    for (auto& p : registry().parameters) {
        if (!frozen(component_of(p.name))) out.push_back(p.tensor);
    }
    return out;
}

Component FeatureFusionNetwork::component_of(const std::string& tensor_name) {
    const std::string head = tensor_name.substr(0, tensor_name.find('.'));
    if (head == "local") return Component::LocalEncoder;
    if (head == "global") return Component::GlobalEncoder;
    if (head == "fusion") return Component::Fusion;
    if (head == "decoder") return Component::Decoder;
    throw ConfigError("tensor '" + tensor_name + "' does not belong to a known component");
}

} // namespace poselift
