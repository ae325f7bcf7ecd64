#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "poselift/checkpoint.hpp"
#include "poselift/errors.hpp"
#include "poselift/training.hpp"
#include "support.hpp"

using namespace poselift;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    ModelConfig config = support::narrow_config(9);
    TrainingSet train;
    TrainingSet validation;

    explicit Fixture(std::size_t frames = 9, std::size_t width = 8) {
        config = support::narrow_config(frames, width);
        SynthDatasetOptions o;
        o.sequences = 3;
        o.frames = 30;
        auto ds = synth_dataset(4, o);
        auto windows = extract_windows(ds, 0, frames);
        auto more = extract_windows(ds, 1, frames);
        windows.insert(windows.end(), more.begin(), more.end());
        train = TrainingSet::from_windows(config, windows);
        validation = TrainingSet::from_windows(config, extract_windows(ds, 2, frames));
    }
};

StagePlan quick(int stage, std::size_t epochs = 2) {
    auto p = StagePlan::desk_profile(stage);
    p.epochs = epochs;
    p.batch_size = 16;
    return p;
}

fs::path temp_path(const std::string& name) {
    auto dir = fs::temp_directory_path() / "poselift_tests";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("stage plan defaults") {
    const std::size_t epochs[] = {80, 80, 20};
    const double lrs[] = {1e-3, 1e-3, 5e-4};
    for (int s = 1; s <= 3; ++s) {
        auto p = StagePlan::paper_defaults(s);
        CHECK(p.epochs == epochs[s - 1]);
        CHECK(p.lr == lrs[s - 1]);
        CHECK(p.batch_size == 1024);
        CHECK(p.ffm_enabled == (s > 1));
        CHECK(p.lr_decay == 0.95);
        auto d = StagePlan::desk_profile(s);
        CHECK(d.batch_size == 32);
        CHECK(d.epochs == (s == 3 ? 5u : 20u));
    }
    auto two = StagePlan::paper_defaults(2);
    CHECK(two.frozen == std::vector{Component::LocalEncoder, Component::GlobalEncoder});
    CHECK(two.discarded == std::vector{Component::Decoder});
    CHECK(StagePlan::paper_defaults(3).frozen.empty());
    CHECK(StagePlan::paper_defaults(1).frozen.empty());
    CHECK_THROWS_AS(StagePlan::paper_defaults(4), ConfigError);
    auto bad = StagePlan::desk_profile(1);
    bad.ffm_enabled = true;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(StagePlan::end_to_end(3, 1e-3, 8).validate());
}

TEST_CASE("epoch losses are reproducible and the schedule decays") {
    Fixture fx;
    auto a = run_stage(fx.config, quick(1, 3), nullptr, fx.train, &fx.validation, 11);
    auto b = run_stage(fx.config, quick(1, 3), nullptr, fx.train, &fx.validation, 11);
    auto c = run_stage(fx.config, quick(1, 3), nullptr, fx.train, &fx.validation, 12);
    REQUIRE(a.metrics.size() == 3);
    std::string csv_a, csv_b;
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(a.metrics[e].train_loss == b.metrics[e].train_loss);
        CHECK(a.metrics[e].val_mpjpe == b.metrics[e].val_mpjpe);
        CHECK(a.metrics[e].lr == doctest::Approx(1e-3 * std::pow(0.95, static_cast<double>(e))).epsilon(1e-14));
        CHECK(std::isfinite(a.metrics[e].val_mpjpe));
        csv_a += metrics_csv_row(a.metrics[e]);
        csv_b += metrics_csv_row(b.metrics[e]);
    }
    CHECK(csv_a == csv_b);
    CHECK(a.metrics[0].train_loss != c.metrics[0].train_loss);
}

TEST_CASE("metrics csv format") {
    CHECK(metrics_csv_header() == "stage,epoch,lr,train_loss,val_mpjpe\n");
    CHECK(metrics_csv_row({2, 7, 0.00095, 123.5, 99.25}) == "2,7,0.00095,123.5,99.25\n");
}

TEST_CASE("a trailing batch of one is merged") {
    Fixture fx;
    TrainingSet odd;
    odd.inputs.assign(fx.train.inputs.begin(), fx.train.inputs.begin() + 17);
    odd.targets.assign(fx.train.targets.begin(), fx.train.targets.begin() + 17);
    FeatureFusionNetwork net(fx.config, 1);
    nn::AdamW opt(net.trainable_parameters(), {});
    CHECK(std::isfinite(train_epoch(net, opt, odd, 16, 3)));
    TrainingSet one;
    one.inputs = {odd.inputs[0]};
    one.targets = {odd.targets[0]};
    CHECK_THROWS_AS(train_epoch(net, opt, one, 16, 3), DataError);
}

TEST_CASE("non-finite loss aborts") {
    Fixture fx;
    FeatureFusionNetwork net(fx.config, 1);
    net.registry().parameters.back().tensor.mutable_data()[0] = std::nan("");
    nn::AdamW opt(net.trainable_parameters(), {});
    CHECK_THROWS_AS(train_epoch(net, opt, fx.train, 16, 1), NumericalError);
}

TEST_CASE("stage prerequisites") {
    Fixture fx;
    try {
        build_stage_network(fx.config, quick(2), nullptr, 1);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("stage-1") != std::string::npos);
    }
    auto s1 = run_stage(fx.config, quick(1, 1), nullptr, fx.train, nullptr, 1);
    try {
        build_stage_network(fx.config, quick(3), &s1.checkpoint, 1);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("stage-2") != std::string::npos);
    }
    auto other = fx.config;
    other.hidden_dim = 24;
    CHECK_THROWS_AS(build_stage_network(other, quick(2), &s1.checkpoint, 1), ConfigError);
}

TEST_CASE("three-stage freezing contract") {
    Fixture fx;
    auto s1 = run_stage(fx.config, quick(1), nullptr, fx.train, nullptr, 5);
    for (const auto& t : s1.checkpoint.tensors) CHECK_FALSE(t.name.starts_with("fusion."));
    CHECK(checkpoint_info(s1.checkpoint).stage == 1);

    // Fresh stage-2 decoders: not the stage-1 ones.
    auto entry = build_stage_network(fx.config, quick(2), &s1.checkpoint, 5);
    CHECK(component_fingerprint(*entry, Component::Decoder) !=
          component_fingerprint(s1.checkpoint, Component::Decoder));
    CHECK(component_fingerprint(*entry, Component::LocalEncoder) ==
          component_fingerprint(s1.checkpoint, Component::LocalEncoder));

    auto s2 = run_stage(fx.config, quick(2), &s1.checkpoint, fx.train, nullptr, 5);
    for (Component c : {Component::LocalEncoder, Component::GlobalEncoder}) {
        CHECK(component_fingerprint(*s2.network, c) == component_fingerprint(s1.checkpoint, c));
        CHECK(component_fingerprint(s2.checkpoint, c) == component_fingerprint(s1.checkpoint, c));
        for (const auto& p : s2.network->registry(c).parameters) CHECK_FALSE(p.tensor.has_grad());
    }
    CHECK(component_fingerprint(s2.checkpoint, Component::Fusion) != 0);
    CHECK(s2.checkpoint.find("fusion.in.weight") != nullptr);

    auto s3 = run_stage(fx.config, quick(3), &s2.checkpoint, fx.train, nullptr, 5);
    for (Component c : kAllComponents) {
        CHECK(component_fingerprint(s3.checkpoint, c) != component_fingerprint(s2.checkpoint, c));
    }
}

TEST_CASE("stage-2 backward reaches only fusion and decoder parameters") {
    Fixture fx;
    auto s1 = run_stage(fx.config, quick(1, 1), nullptr, fx.train, nullptr, 2);
    auto net = build_stage_network(fx.config, quick(2), &s1.checkpoint, 2);
    std::vector<const ModelInput*> inputs{&fx.train.inputs[0], &fx.train.inputs[1], &fx.train.inputs[2]};
    std::vector<double> target;
    for (int k = 0; k < 3; ++k) target.insert(target.end(), fx.train.targets[k].coords.begin(), fx.train.targets[k].coords.end());
    nn::ForwardContext ctx{nn::Mode::Train, CounterRng{1}};
    auto loss = nn::mpjpe_loss(net->forward(net->make_batch(inputs), ctx), nn::Tensor::from({3, 51}, target));
    loss.backward();
    for (const auto& p : net->registry().parameters) {
        const auto c = FeatureFusionNetwork::component_of(p.name);
        const bool trainable = c == Component::Fusion || c == Component::Decoder;
        CHECK_MESSAGE(p.tensor.has_grad() == trainable, p.name);
    }
}

TEST_CASE("checkpoint round trip and integrity") {
    Fixture fx;
    auto s1 = run_stage(fx.config, quick(1, 1), nullptr, fx.train, nullptr, 8);
    const auto path = temp_path("stage1.ckpt");
    nn::save_checkpoint(s1.checkpoint, path);
    auto loaded = nn::load_checkpoint(path);
    CHECK(loaded.metadata == s1.checkpoint.metadata);
    REQUIRE(loaded.tensors.size() == s1.checkpoint.tensors.size());
    for (std::size_t k = 0; k < loaded.tensors.size(); ++k) {
        CHECK(loaded.tensors[k].name == s1.checkpoint.tensors[k].name);
        CHECK(loaded.tensors[k].shape == s1.checkpoint.tensors[k].shape);
        CHECK(support::bit_identical(loaded.tensors[k].values, s1.checkpoint.tensors[k].values));
    }
    CHECK(loaded.find("optim.m.local.0.expand.weight") != nullptr);

    FeatureFusionNetwork restored(s1.network->config(), 999);
    load_components(restored, loaded, {kAllComponents.begin(), kAllComponents.end()});
    for (Component c : kAllComponents)
        CHECK(component_fingerprint(restored, c) == component_fingerprint(*s1.network, c));

    nn::AdamW opt(restored.trainable_parameters(), {});
    load_optimizer(opt, restored, loaded);
    CHECK(std::to_string(opt.state().step) == s1.checkpoint.meta("optim.step"));

    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x20;
    const auto bad = temp_path("corrupt.ckpt");
    std::ofstream(bad, std::ios::binary).write(corrupt.data(), static_cast<std::streamsize>(corrupt.size()));
    CHECK_THROWS_AS(nn::load_checkpoint(bad), DataError);
    std::ofstream(bad, std::ios::binary | std::ios::trunc).write(bytes.data(), 40);
    CHECK_THROWS_AS(nn::load_checkpoint(bad), DataError);
    std::ofstream(bad, std::ios::binary | std::ios::trunc) << "not a checkpoint at all";
    CHECK_THROWS_AS(nn::load_checkpoint(bad), DataError);

    auto other = fx.config;
    other.flags.positional = true;
    FeatureFusionNetwork mismatched(other, 1);
    CHECK_THROWS_AS(load_components(mismatched, loaded, {Component::LocalEncoder}), ConfigError);
}

TEST_CASE("smoke training run lowers the loss") {
    auto cfg = ModelConfig::desk_profile();
    SynthDatasetOptions o;
    o.sequences = 4;
    o.frames = 50;
    auto ds = synth_dataset(21, o);
    auto windows = extract_all_windows(ds, 27);
    REQUIRE(windows.size() == 200);
    auto train = TrainingSet::from_windows(cfg, windows);
    auto plan = StagePlan::desk_profile(1);
    REQUIRE(plan.epochs == 20);
    auto r = run_stage(cfg, plan, nullptr, train, nullptr, 1);
    CHECK(r.metrics.back().train_loss < r.metrics.front().train_loss);
    MESSAGE("epoch 1 loss " << r.metrics.front().train_loss << ", epoch 20 loss " << r.metrics.back().train_loss);
}

}
