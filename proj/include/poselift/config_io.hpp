#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "poselift/checkpoint.hpp"
#include "poselift/model.hpp"
#include "poselift/training.hpp"

namespace poselift {

struct RunConfig {
    ModelConfig model = ModelConfig::desk_profile();
    std::array<StagePlan, 3> stages{StagePlan::desk_profile(1), StagePlan::desk_profile(2), StagePlan::desk_profile(3)};
    std::uint64_t seed = 1;
    double validation_fraction = 0.1;

    static RunConfig desk_profile() { return {}; }
    static RunConfig paper_defaults();
};

// INI text with sections [run], [model], [partition], [optimizer], [stage1],
// [stage2], [stage3]. Missing keys keep the defaults of the profile named by
// `[run] profile` (desk or paper, default desk). See README for every key.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// Embeds the formatted config in checkpoint metadata, one "run_config.NNNN"
// entry per line, so that a checkpoint alone can rebuild its network.
void attach_run_config(nn::Checkpoint& checkpoint, const RunConfig& config);
// Throws DataError when the checkpoint carries no config.
RunConfig run_config_from_checkpoint(const nn::Checkpoint& checkpoint);

} // namespace poselift
