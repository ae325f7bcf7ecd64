#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "poselift/encoding.hpp"
#include "poselift/layers.hpp"
#include "poselift/pose.hpp"

namespace poselift {

// Anatomical grouping of joints. Groups are disjoint and cover every joint.
struct GroupPartition {
    std::vector<std::string> names;
    std::vector<std::vector<std::size_t>> groups;

    std::size_t size() const { return groups.size(); }
    // Throws ConfigError unless the groups partition {0, ..., joints-1}.
    void validate(std::size_t joints) const;

    // 17-joint layout with the pelvis at index 0: torso, arms, legs.
    static GroupPartition default17();
};

struct ModelConfig {
    std::size_t frames = 243;
    std::size_t joints = 17;
    std::size_t root_index = 0;
    GroupPartition partition = GroupPartition::default17();

    std::size_t feature_dim = 512;
    std::size_t tcn_channels = 512;
    double tcn_dropout = 0.2;
    std::size_t hidden_dim = 1024;
    double dense_dropout = 0.25;
    double leaky_slope = 0.01;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    InputFlags flags;
    TemporalOperator temporal_op;
    bool ffm_enabled = true;
    // Feed the global encoder the center frame's root-relative block instead
    // of absolute coordinates (the "without absolute positions" ablation).
    bool global_uses_positional = false;
    // Decoder outputs are in meters; this converts them to millimeters.
    double output_scale = 1000.0;

    static ModelConfig paper_defaults() { return {}; }
    // T=27, widths 64/64/128. CPU-tractable.
    static ModelConfig desk_profile();

    // Number of dilated residual blocks, log3(frames). Throws ConfigError when
    // frames is not a power of three (>= 3).
    std::size_t tcn_depth() const;
    void validate() const;
    // Hash of every architecture-defining field. The FFM switch is excluded:
    // it is a property of the training stage.
    std::uint64_t architecture_hash() const;
};

enum class Component : std::uint8_t { LocalEncoder, GlobalEncoder, Fusion, Decoder };

inline constexpr std::array kAllComponents{Component::LocalEncoder, Component::GlobalEncoder, Component::Fusion,
                                           Component::Decoder};

std::string component_name(Component c);

struct ModelInput {
    EnhancedInput enhanced;
    std::vector<double> global; // J x 2 center-frame coordinates
};

ModelInput prepare_input(const ModelConfig& config, const PoseSequence2D& seq);

struct NetworkBatch {
    std::size_t size = 0;
    std::vector<nn::Tensor> group_inputs; // per group [T, B, J_i * C]
    nn::Tensor global_input;              // [B, 2J]
};

// Linear -> norm -> activation -> dropout, a residual pair of the same, then
// a linear output projection.
class DenseBlock {
public:
    DenseBlock() = default;
    DenseBlock(std::size_t in, std::size_t hidden, std::size_t out, const ModelConfig& config, std::mt19937_64& gen);

    nn::Tensor operator()(const nn::Tensor& x, nn::ForwardContext& ctx, nn::Mode mode);
    void collect(const std::string& prefix, nn::TensorRegistry& out) const;
    std::size_t in_features() const { return input_.in_features(); }

private:
    nn::Tensor stage(const nn::Linear& lin, nn::BatchNorm& bn, const nn::Tensor& x, nn::ForwardContext& ctx,
                     nn::Mode mode);

    nn::Linear input_;
    nn::BatchNorm input_bn_;
    nn::Linear first_;
    nn::BatchNorm first_bn_;
    nn::Linear second_;
    nn::BatchNorm second_bn_;
    nn::Linear output_;
    double slope_ = 0.01;
    double dropout_ = 0.0;
};

// Collapses a [T, B, C_in] window to [B, D]: a pointwise projection, then
// log3(T) residual blocks with width-3 convolutions at dilations 1, 3, 9, ...,
// then a pointwise projection to the feature width.
class TemporalEncoder {
public:
    TemporalEncoder() = default;
    TemporalEncoder(std::size_t in_channels, const ModelConfig& config, std::mt19937_64& gen);

    nn::Tensor operator()(const nn::Tensor& x, nn::ForwardContext& ctx, nn::Mode mode);
    void collect(const std::string& prefix, nn::TensorRegistry& out) const;
    std::size_t receptive_field() const;

private:
    struct Block {
        nn::Conv1d dilated;
        nn::BatchNorm dilated_bn;
        nn::Conv1d pointwise;
        nn::BatchNorm pointwise_bn;
    };

    nn::Conv1d expand_;
    nn::BatchNorm expand_bn_;
    std::vector<Block> blocks_;
    nn::Linear project_;
    double slope_ = 0.01;
    double dropout_ = 0.0;
};

struct NetworkFeatures {
    std::vector<nn::Tensor> local;
    nn::Tensor global;
    std::vector<nn::Tensor> fused; // empty when the FFM is disabled
};

// Grouped local encoders, a global encoder over the current pose, the
// feature fusion block and per-group decoders.
class FeatureFusionNetwork {
public:
    FeatureFusionNetwork(ModelConfig config, std::uint64_t init_seed);

    const ModelConfig& config() const { return config_; }
    bool ffm_enabled() const { return config_.ffm_enabled; }

    NetworkBatch make_batch(std::span<const ModelInput* const> inputs) const;

    nn::Tensor local_encode(std::size_t group, const nn::Tensor& input, nn::ForwardContext& ctx);
    nn::Tensor global_encode(const nn::Tensor& input, nn::ForwardContext& ctx);
    // others: the N-1 local features of every group except `group`, ascending.
    nn::Tensor fuse(std::size_t group, const std::vector<nn::Tensor>& others, nn::ForwardContext& ctx);
    nn::Tensor decode(std::size_t group, const nn::Tensor& local, const std::optional<nn::Tensor>& fused,
                      const nn::Tensor& global, nn::ForwardContext& ctx);

    NetworkFeatures encode(const NetworkBatch& batch, nn::ForwardContext& ctx);
    // [B, 3J] root-relative millimeters; the root row is exactly zero.
    nn::Tensor forward(const NetworkBatch& batch, nn::ForwardContext& ctx);

    // Eval-mode single-window prediction.
    Pose3D predict(const PoseSequence2D& seq);
    std::vector<Pose3D> predict(std::span<const ModelInput> inputs, std::size_t batch_size = 256);

    // Frozen components get no gradients and always run in eval mode.
    void set_frozen(Component c, bool frozen);
    bool frozen(Component c) const;

    nn::TensorRegistry registry() const;
    nn::TensorRegistry registry(Component c) const;
    std::vector<nn::Tensor> trainable_parameters() const;
    static Component component_of(const std::string& tensor_name);

private:
    nn::Mode mode_for(Component c, const nn::ForwardContext& ctx) const;

    ModelConfig config_;
    std::vector<TemporalEncoder> local_;
    DenseBlock global_;
    std::optional<DenseBlock> fusion_;
    std::vector<DenseBlock> decoders_;
    std::array<bool, 4> frozen_{};
    std::vector<std::size_t> output_columns_;
};

} // namespace poselift
