#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "poselift/ops.hpp"
#include "poselift/rng.hpp"
#include "poselift/tensor.hpp"

namespace poselift::nn {

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

// Learnable tensors and non-learnable state (running statistics) of a module.
struct TensorRegistry {
    std::vector<NamedTensor> parameters;
    std::vector<NamedTensor> buffers;
};

// Per-forward-pass settings. Each dropout application draws its mask from a
// fresh stream so a pass is reproducible from (seed, call order).
struct ForwardContext {
    Mode mode = Mode::Eval;
    CounterRng rng{};
    std::uint64_t next_stream = 0;

    std::uint64_t take_stream() { return next_stream++; }
};

// Fan-in scaled uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& gen);

class Linear {
public:
    Linear() = default;
    Linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& gen);

    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
    void collect(const std::string& prefix, TensorRegistry& out) const;

    std::size_t in_features() const { return weight.dim(1); }
    std::size_t out_features() const { return weight.dim(0); }

    Tensor weight; // [out, in]
    Tensor bias;   // [out]
};

class Conv1d {
public:
    Conv1d() = default;
    Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t width, std::size_t dilation,
           std::mt19937_64& gen);

    Tensor operator()(const Tensor& x) const { return conv1d(x, weight, bias, dilation); }
    void collect(const std::string& prefix, TensorRegistry& out) const;

    std::size_t width() const { return weight.dim(0); }
    std::size_t receptive_field() const { return (width() - 1) * dilation + 1; }

    Tensor weight; // [width, out, in]
    Tensor bias;   // [out]
    std::size_t dilation = 1;
};

class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(std::size_t channels, double momentum = 0.1, double eps = 1e-5);

    Tensor operator()(const Tensor& x, Mode mode);
    void collect(const std::string& prefix, TensorRegistry& out) const;

    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

} // namespace poselift::nn
