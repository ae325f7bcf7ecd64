#include "poselift/optim.hpp"

#include <cmath>

#include "poselift/errors.hpp"

namespace poselift::nn {

AdamW::AdamW(std::vector<Tensor> params, AdamWHyper hyper) : params_(std::move(params)) {
    if (!(hyper.beta1 > 0.0 && hyper.beta1 < 1.0 && hyper.beta2 > 0.0 && hyper.beta2 < 1.0)) {
        throw ConfigError("adamw: betas must lie in (0, 1)");
    }
    if (!(hyper.lr > 0.0) || hyper.weight_decay < 0.0) throw ConfigError("adamw: invalid lr or weight decay");
    state_.hyper = hyper;
    for (const auto& p : params_) {
        state_.first_moment.emplace_back(p.numel(), 0.0);
        state_.second_moment.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::step() {
    ++state_.step;
    const auto& h = state_.hyper;
    const double t = static_cast<double>(state_.step);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);
    const double decay = 1.0 - h.lr * h.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto values = params_[k].mutable_data();
        auto grad = params_[k].grad();
        auto& m = state_.first_moment[k];
        auto& v = state_.second_moment[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad.empty() ? 0.0 : grad[i];
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            values[i] = values[i] * decay - h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void AdamW::decay_lr(double factor) { state_.hyper.lr *= factor; }

} // namespace poselift::nn
