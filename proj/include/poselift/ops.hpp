#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "poselift/rng.hpp"
#include "poselift/tensor.hpp"

// Differentiable kernels.
//
// Sequence activations use a time-major [T, B, C] layout: each time step is a
// contiguous B x C block, so a dilated convolution tap is a contiguous row
// range and every kernel reduces to dense matrix products.
namespace poselift::nn {

enum class Mode { Train, Eval };

// Valid dilated convolution over axis 0 of x: [T, B, C_in].
// weight: [K, C_out, C_in], bias: [C_out]. Result: [T - (K-1)*dilation, B, C_out].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation);

// y = x W^T + b over the last axis. x: [..., D_in], weight: [D_out, D_in], bias: [D_out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor leaky_relu(const Tensor& x, double slope);

struct BatchNormState {
    std::span<double> running_mean;
    std::span<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

// Per-channel normalization over every row of x: [..., B, C] (channels last).
// Train mode uses batch statistics and updates the running ones; eval mode
// uses the running ones. Requires B >= 2 in train mode.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState state, Mode mode);

// Inverted dropout. The mask for element i is drawn from rng.uniform(stream, i).
Tensor dropout(const Tensor& x, double rate, Mode mode, const CounterRng& rng, std::uint64_t stream);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);

// Concatenates along the last axis; leading shapes must agree.
Tensor concat_last(const std::vector<Tensor>& parts);

// Rows [start, start + length) of axis 0.
Tensor slice_leading(const Tensor& x, std::size_t start, std::size_t length);

Tensor reshape(const Tensor& x, Shape shape);

inline constexpr std::size_t kZeroColumn = static_cast<std::size_t>(-1);

// x: [N, C_in]. Output column c copies input column source[c], or is zero
// when source[c] == kZeroColumn.
Tensor select_columns(const Tensor& x, std::span<const std::size_t> source);

// Mean over rows and joints of the Euclidean distance between 3-vectors.
// pred and target: [B, 3J]. Subgradient 0 at zero distance.
Tensor mpjpe_loss(const Tensor& pred, const Tensor& target);

} // namespace poselift::nn
