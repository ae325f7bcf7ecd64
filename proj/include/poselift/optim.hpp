#pragma once

#include <cstdint>
#include <vector>

#include "poselift/tensor.hpp"

namespace poselift::nn {

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct OptimizerState {
    AdamWHyper hyper;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// Decoupled weight decay: p <- p - lr*wd*p, then the bias-corrected Adam step.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWHyper hyper);

    // Tensors without an accumulated gradient are treated as zero-gradient.
    void step();
    void zero_grad();
    // One epoch boundary: lr <- 0.95 lr.
    void decay_lr(double factor = 0.95);

    const OptimizerState& state() const { return state_; }
    OptimizerState& state() { return state_; }
    const std::vector<Tensor>& params() const { return params_; }
    double lr() const { return state_.hyper.lr; }

private:
    std::vector<Tensor> params_;
    OptimizerState state_;
};

} // namespace poselift::nn
