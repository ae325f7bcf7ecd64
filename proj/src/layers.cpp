#include "poselift/layers.hpp"

#include <cmath>

namespace poselift::nn {

Tensor init_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& gen) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = dist(gen);
    return Tensor::from(std::move(shape), std::move(values), true);
}

Linear::Linear(std::size_t in_features, std::size_t out_features, std::mt19937_64& gen)
    : weight(init_uniform({out_features, in_features}, in_features, gen)),
      bias(init_uniform({out_features}, in_features, gen)) {}

void Linear::collect(const std::string& prefix, TensorRegistry& out) const {
    out.parameters.push_back({prefix + ".weight", weight});
    out.parameters.push_back({prefix + ".bias", bias});
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t width, std::size_t dilation_,
               std::mt19937_64& gen)
    : weight(init_uniform({width, out_channels, in_channels}, in_channels * width, gen)),
      bias(init_uniform({out_channels}, in_channels * width, gen)),
      dilation(dilation_) {}

void Conv1d::collect(const std::string& prefix, TensorRegistry& out) const {
    out.parameters.push_back({prefix + ".weight", weight});
    out.parameters.push_back({prefix + ".bias", bias});
}

BatchNorm::BatchNorm(std::size_t channels, double momentum_, double eps_)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      running_mean(Tensor::zeros({channels})),
      running_var(Tensor::full({channels}, 1.0)),
      momentum(momentum_),
      eps(eps_) {}

Tensor BatchNorm::operator()(const Tensor& x, Mode mode) {
    return batch_norm(x, gamma, beta, {running_mean.mutable_data(), running_var.mutable_data(), momentum, eps}, mode);
}

void BatchNorm::collect(const std::string& prefix, TensorRegistry& out) const {
    out.parameters.push_back({prefix + ".gamma", gamma});
    out.parameters.push_back({prefix + ".beta", beta});
    out.buffers.push_back({prefix + ".running_mean", running_mean});
    out.buffers.push_back({prefix + ".running_var", running_var});
}

} // namespace poselift::nn
