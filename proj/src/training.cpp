#include "poselift/training.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "poselift/errors.hpp"
#include "poselift/evaluation.hpp"
#include "poselift/hash.hpp"

namespace poselift {

StagePlan StagePlan::paper_defaults(int stage) {
    StagePlan p;
    p.stage = stage;
    switch (stage) {
    case 1:
        p.epochs = 80;
        p.lr = 1e-3;
        p.ffm_enabled = false;
        break;
    case 2:
        p.epochs = 80;
        p.lr = 1e-3;
        p.ffm_enabled = true;
        p.frozen = {Component::LocalEncoder, Component::GlobalEncoder};
        p.discarded = {Component::Decoder};
        break;
    case 3:
        p.epochs = 20;
        p.lr = 5e-4;
        p.ffm_enabled = true;
        break;
    default:
        throw ConfigError("stage must be 1, 2 or 3");
    }
    return p;
}

StagePlan StagePlan::end_to_end(std::size_t epochs, double lr, std::size_t batch_size) {
    StagePlan p;
    p.stage = 0;
    p.epochs = epochs;
    p.lr = lr;
    p.batch_size = batch_size;
    p.ffm_enabled = true;
    return p;
}

StagePlan StagePlan::desk_profile(int stage) {
    StagePlan p = paper_defaults(stage);
    p.epochs = stage == 3 ? 5 : 20;
    p.batch_size = 32;
    return p;
}

void StagePlan::validate() const {
    if (stage < 0 || stage > 3) throw ConfigError("stage must be 0, 1, 2 or 3");
    if (epochs == 0 || batch_size < 2) throw ConfigError("stage needs at least one epoch and a batch of two");
    if (!(lr > 0.0) || !(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("invalid learning-rate schedule");
    if (stage == 1 && ffm_enabled) throw ConfigError("stage 1 trains without the fusion block");
    if (stage != 1 && !ffm_enabled) throw ConfigError("stages 2 and 3 train with the fusion block");
}

TrainingSet TrainingSet::from_windows(const ModelConfig& config, const std::vector<Window>& windows) {
    TrainingSet set;
    set.inputs.reserve(windows.size());
    set.targets.reserve(windows.size());
    for (const auto& w : windows) {
        set.inputs.push_back(prepare_input(config, w.input));
        set.targets.push_back(w.target);
    }
    return set;
}

std::string metrics_csv_header() { return "stage,epoch,lr,train_loss,val_mpjpe\n"; }

std::string metrics_csv_row(const EpochMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%zu,%.10g,%.10g,%.10g\n", m.stage, m.epoch, m.lr, m.train_loss, m.val_mpjpe);
    return buf;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) out.emplace_back(start, std::min(batch_size, n - start));
    if (out.size() > 1 && out.back().second == 1) {
        out.pop_back();
        out.back().second += 1;
    }
    return out;
}

} // namespace

double train_epoch(FeatureFusionNetwork& network, nn::AdamW& optimizer, const TrainingSet& data,
                   std::size_t batch_size, std::uint64_t seed) {
    if (data.size() < 2) throw DataError("training needs at least two windows");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(derive_seed(seed, 0x5u));
    std::shuffle(order.begin(), order.end(), gen);

    const std::size_t width = network.config().joints * 3;
    double total = 0.0;
    std::size_t batch_index = 0;
    for (auto [start, count] : batch_ranges(order.size(), batch_size)) {
        std::vector<const ModelInput*> inputs;
        std::vector<double> target;
        target.reserve(count * width);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t idx = order[start + k];
            inputs.push_back(&data.inputs[idx]);
            target.insert(target.end(), data.targets[idx].coords.begin(), data.targets[idx].coords.end());
        }
        nn::ForwardContext ctx{nn::Mode::Train, CounterRng{derive_seed(seed, 0x100 + batch_index)}};
        const nn::Tensor pred = network.forward(network.make_batch(inputs), ctx);
        const nn::Tensor loss = nn::mpjpe_loss(pred, nn::Tensor::from({count, width}, std::move(target)));
        const double value = loss.item();
        if (!std::isfinite(value)) {
            throw NumericalError("non-finite training loss in batch " + std::to_string(batch_index) + " (" +
                                 std::to_string(count) + " windows, lr " + std::to_string(optimizer.lr()) + ")");
        }
        optimizer.zero_grad();
        loss.backward();
        optimizer.step();
        total += value * static_cast<double>(count);
        ++batch_index;
    }
    optimizer.zero_grad();
    return total / static_cast<double>(data.size());
}

double evaluate_mpjpe(FeatureFusionNetwork& network, const TrainingSet& data) {
    if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    return mpjpe(network.predict(data.inputs), data.targets);
}

nn::Checkpoint make_checkpoint(const FeatureFusionNetwork& network, const nn::AdamW* optimizer,
                               const CheckpointInfo& info) {
    nn::Checkpoint ck;
    ck.metadata["config_hash"] = std::to_string(info.config_hash);
    ck.metadata["stage"] = std::to_string(info.stage);
    ck.metadata["epoch"] = std::to_string(info.epoch);
    ck.metadata["seed"] = std::to_string(info.seed);
    ck.metadata["ffm_enabled"] = network.ffm_enabled() ? "1" : "0";
    const auto reg = network.registry();
    for (const auto& list : {reg.parameters, reg.buffers}) {
        for (const auto& t : list) {
            ck.tensors.push_back({t.name, t.tensor.shape(), {t.tensor.data().begin(), t.tensor.data().end()}});
        }
    }
    if (optimizer) {
        const auto& st = optimizer->state();
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", st.hyper.lr);
        ck.metadata["optim.lr"] = buf;
        ck.metadata["optim.step"] = std::to_string(st.step);
        std::snprintf(buf, sizeof buf, "%.17g", st.hyper.weight_decay);
        ck.metadata["optim.weight_decay"] = buf;
        // Moments are stored under the name of the parameter they belong to.
        std::vector<std::string> names;
        for (const auto& p : reg.parameters) {
            for (std::size_t k = 0; k < optimizer->params().size(); ++k) {
                if (optimizer->params()[k].node() == p.tensor.node()) {
                    ck.tensors.push_back({"optim.m." + p.name, p.tensor.shape(), st.first_moment[k]});
                    ck.tensors.push_back({"optim.v." + p.name, p.tensor.shape(), st.second_moment[k]});
                }
            }
        }
    }
    return ck;
}

CheckpointInfo checkpoint_info(const nn::Checkpoint& checkpoint) {
    CheckpointInfo info;
    try {
        info.config_hash = std::stoull(checkpoint.meta("config_hash"));
        info.stage = std::stoi(checkpoint.meta("stage"));
        info.epoch = std::stoull(checkpoint.meta("epoch"));
        info.seed = std::stoull(checkpoint.meta("seed"));
    } catch (const std::logic_error&) {
        throw DataError("checkpoint metadata is malformed");
    }
    return info;
}

void load_components(FeatureFusionNetwork& network, const nn::Checkpoint& checkpoint,
                     const std::vector<Component>& components) {
    const auto info = checkpoint_info(checkpoint);
    if (info.config_hash != network.config().architecture_hash()) {
        throw ConfigError("checkpoint was written for a different model configuration (hash " +
                          std::to_string(info.config_hash) + ", expected " +
                          std::to_string(network.config().architecture_hash()) + ")");
    }
    auto reg = network.registry();
    for (auto* list : {&reg.parameters, &reg.buffers}) {
        for (auto& t : *list) {
            const Component c = FeatureFusionNetwork::component_of(t.name);
            if (std::find(components.begin(), components.end(), c) == components.end()) continue;
            const auto* stored = checkpoint.find(t.name);
            if (!stored) throw DataError("checkpoint lacks tensor '" + t.name + "'");
            if (stored->shape != t.tensor.shape()) {
                throw DataError("checkpoint tensor '" + t.name + "' has shape " + nn::shape_string(stored->shape) +
                                ", model expects " + nn::shape_string(t.tensor.shape()));
            }
            std::copy(stored->values.begin(), stored->values.end(), t.tensor.mutable_data().begin());
        }
    }
}

void load_optimizer(nn::AdamW& optimizer, const FeatureFusionNetwork& network, const nn::Checkpoint& checkpoint) {
    auto& st = optimizer.state();
    const auto reg = network.registry();
    for (std::size_t k = 0; k < optimizer.params().size(); ++k) {
        for (const auto& p : reg.parameters) {
            if (p.tensor.node() != optimizer.params()[k].node()) continue;
            const auto* m = checkpoint.find("optim.m." + p.name);
            const auto* v = checkpoint.find("optim.v." + p.name);
            if (!m || !v || m->values.size() != st.first_moment[k].size() || v->values.size() != st.second_moment[k].size()) {
                throw DataError("checkpoint lacks optimizer state for '" + p.name + "'");
            }
            st.first_moment[k] = m->values;
            st.second_moment[k] = v->values;
        }
    }
    try {
        st.step = std::stoull(checkpoint.meta("optim.step"));
        st.hyper.lr = std::stod(checkpoint.meta("optim.lr"));
    } catch (const std::logic_error&) {
        throw DataError("checkpoint optimizer metadata is malformed");
    }
}

std::unique_ptr<FeatureFusionNetwork> build_stage_network(const ModelConfig& config, const StagePlan& plan,
                                                          const nn::Checkpoint* previous, std::uint64_t seed) {
    plan.validate();
    ModelConfig stage_config = config;
    stage_config.ffm_enabled = plan.ffm_enabled;
    // Fresh decoders in stage 2 must not repeat the stage-1 initialization.
    auto network = std::make_unique<FeatureFusionNetwork>(stage_config, derive_seed(seed, 0x1000 + plan.stage));

    if (plan.stage > 1) {
        const int needed = plan.stage - 1;
        if (!previous) {
            throw ConfigError("stage " + std::to_string(plan.stage) + " requires a stage-" + std::to_string(needed) +
                              " checkpoint");
        }
        const auto info = checkpoint_info(*previous);
        if (info.stage != needed) {
            throw ConfigError("stage " + std::to_string(plan.stage) + " requires a stage-" + std::to_string(needed) +
                              " checkpoint, got one from stage " + std::to_string(info.stage));
        }
        std::vector<Component> load;
        for (Component c : kAllComponents) {
            const bool present = c != Component::Fusion || previous->metadata.count("ffm_enabled") == 0 ||
                                 previous->meta("ffm_enabled") == "1";
            const bool dropped = std::find(plan.discarded.begin(), plan.discarded.end(), c) != plan.discarded.end();
            if (present && !dropped) load.push_back(c);
        }
        load_components(*network, *previous, load);
    }
    for (Component c : plan.frozen) network->set_frozen(c, true);
    return network;
}

StageResult run_stage(const ModelConfig& config, const StagePlan& plan, const nn::Checkpoint* previous,
                      const TrainingSet& train, const TrainingSet* validation, std::uint64_t seed,
                      const EpochCallback& on_epoch) {
    StageResult result;
    result.network = build_stage_network(config, plan, previous, seed);
    nn::AdamWHyper hyper = plan.adam;
    hyper.lr = plan.lr;
    nn::AdamW optimizer(result.network->trainable_parameters(), hyper);

    for (std::size_t epoch = 1; epoch <= plan.epochs; ++epoch) {
        EpochMetrics m;
        m.stage = plan.stage;
        m.epoch = epoch;
        m.lr = optimizer.lr();
        m.train_loss = train_epoch(*result.network, optimizer, train, plan.batch_size,
                                   derive_seed(seed, static_cast<std::uint64_t>(plan.stage) * 100000 + epoch));
        m.val_mpjpe = validation ? evaluate_mpjpe(*result.network, *validation) : std::numeric_limits<double>::quiet_NaN();
        optimizer.decay_lr(plan.lr_decay);
        result.metrics.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    result.checkpoint = make_checkpoint(*result.network, &optimizer,
                                        {config.architecture_hash(), plan.stage, plan.epochs, seed});
    return result;
}

std::uint64_t component_fingerprint(const FeatureFusionNetwork& network, Component c) {
    Fnv1a h;
    const auto reg = network.registry(c);
    for (const auto& list : {reg.parameters, reg.buffers}) {
        for (const auto& t : list) {
            h.update(t.name);
            h.update_values(t.tensor.data());
        }
    }
    return h.digest();
}

std::uint64_t component_fingerprint(const nn::Checkpoint& checkpoint, Component c) {
    // Same traversal order as the network registry: parameters, then buffers.
    Fnv1a h;
    std::vector<const nn::StoredTensor*> params, buffers;
    for (const auto& t : checkpoint.tensors) {
        if (t.name.starts_with("optim.")) continue;
        if (FeatureFusionNetwork::component_of(t.name) != c) continue;
        const bool buffer = t.name.ends_with(".running_mean") || t.name.ends_with(".running_var");
        (buffer ? buffers : params).push_back(&t);
    }
    for (const auto* list : {&params, &buffers}) {
        for (const auto* t : *list) {
            h.update(t->name);
            h.update_values(std::span<const double>(t->values));
        }
    }
    return h.digest();
}

} // namespace poselift
