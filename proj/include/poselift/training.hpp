#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poselift/checkpoint.hpp"
#include "poselift/data.hpp"
#include "poselift/model.hpp"
#include "poselift/optim.hpp"

namespace poselift {

// One stage of the three-stage schedule:
//   1. encoders + throwaway decoders, no fusion block;
//   2. encoders loaded and frozen, fusion block + fresh decoders trained;
//   3. everything finetuned.
// Stage 0 is the single-stage alternative: the full network, fusion block
// included, trained end to end from scratch.
struct StagePlan {
    int stage = 1;
    std::size_t epochs = 80;
    double lr = 1e-3;
    double lr_decay = 0.95;
    std::size_t batch_size = 1024;
    bool ffm_enabled = false;
    std::vector<Component> frozen;
    std::vector<Component> discarded; // re-initialized on entry instead of loaded
    nn::AdamWHyper adam;              // lr is taken from `lr` above

    static StagePlan paper_defaults(int stage);
    static StagePlan desk_profile(int stage);
    static StagePlan end_to_end(std::size_t epochs, double lr, std::size_t batch_size);
    void validate() const;
};

// Inputs prepared once per model configuration.
struct TrainingSet {
    std::vector<ModelInput> inputs;
    std::vector<Pose3D> targets;

    std::size_t size() const { return inputs.size(); }
    static TrainingSet from_windows(const ModelConfig& config, const std::vector<Window>& windows);
};

struct EpochMetrics {
    int stage = 0;
    std::size_t epoch = 0; // 1-based
    double lr = 0.0;       // rate used during the epoch
    double train_loss = 0.0;
    double val_mpjpe = 0.0; // NaN when no validation data
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

// One shuffled pass in fixed-size batches, last partial batch kept. A batch of
// a single window is merged into the previous one (batch norm needs two).
// Returns the window-weighted mean loss. Throws NumericalError on a non-finite loss.
double train_epoch(FeatureFusionNetwork& network, nn::AdamW& optimizer, const TrainingSet& data,
                   std::size_t batch_size, std::uint64_t seed);

// Mean per-joint error of eval-mode predictions.
double evaluate_mpjpe(FeatureFusionNetwork& network, const TrainingSet& data);

struct CheckpointInfo {
    std::uint64_t config_hash = 0;
    int stage = 0;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
};

nn::Checkpoint make_checkpoint(const FeatureFusionNetwork& network, const nn::AdamW* optimizer,
                               const CheckpointInfo& info);
CheckpointInfo checkpoint_info(const nn::Checkpoint& checkpoint);

// Copies the tensors of the listed components into the network. Throws
// ConfigError on a config-hash mismatch and DataError on missing or
// mis-shaped tensors.
void load_components(FeatureFusionNetwork& network, const nn::Checkpoint& checkpoint,
                     const std::vector<Component>& components);

// Rebuilds the optimizer moments and step stored in a checkpoint.
void load_optimizer(nn::AdamW& optimizer, const FeatureFusionNetwork& network, const nn::Checkpoint& checkpoint);

// Network for a stage, with its prerequisites applied: stage 2 needs a stage-1
// checkpoint and takes only the encoders from it; stage 3 needs a stage-2
// checkpoint and takes everything.
std::unique_ptr<FeatureFusionNetwork> build_stage_network(const ModelConfig& config, const StagePlan& plan,
                                                          const nn::Checkpoint* previous, std::uint64_t seed);

struct StageResult {
    std::unique_ptr<FeatureFusionNetwork> network;
    std::vector<EpochMetrics> metrics;
    nn::Checkpoint checkpoint;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Runs a full stage with a fresh optimizer; lr decays after every epoch.
StageResult run_stage(const ModelConfig& config, const StagePlan& plan, const nn::Checkpoint* previous,
                      const TrainingSet& train, const TrainingSet* validation, std::uint64_t seed,
                      const EpochCallback& on_epoch = {});

// Fingerprint of every tensor (parameters and buffers) of a component.
std::uint64_t component_fingerprint(const FeatureFusionNetwork& network, Component c);
std::uint64_t component_fingerprint(const nn::Checkpoint& checkpoint, Component c);

} // namespace poselift
