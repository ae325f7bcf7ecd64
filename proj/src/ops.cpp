#include "poselift/ops.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "poselift/errors.hpp"

namespace poselift::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

ConstMapMat as_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
    return ConstMapMat(v.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat as_matrix(std::vector<double>& v, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
    return MapMat(v.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Column sums in a fixed row order. Eigen's reductions peel by runtime
// alignment, which makes the result depend on heap addresses.
void accumulate_rows(std::vector<double>& into, const std::vector<double>& m, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = m.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) into[c] += row[c];
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
    }
}

} // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation) {
    if (x.ndim() != 3) throw ConfigError("conv1d: input must be [T, B, C], got " + shape_string(x.shape()));
    if (weight.ndim() != 3) throw ConfigError("conv1d: weight must be [K, C_out, C_in]");
    if (dilation == 0) throw ConfigError("conv1d: dilation must be positive");
    const std::size_t steps = x.dim(0), batch = x.dim(1), c_in = x.dim(2);
    const std::size_t width = weight.dim(0), c_out = weight.dim(1);
    if (weight.dim(2) != c_in) {
        throw ConfigError("conv1d: weight expects " + std::to_string(weight.dim(2)) + " input channels, got " +
                          std::to_string(c_in));
    }
    if (bias.numel() != c_out) throw ConfigError("conv1d: bias length does not match output channels");
    const std::size_t span = (width - 1) * dilation;
    if (steps < span + 1) {
        throw ConfigError("conv1d: sequence of " + std::to_string(steps) + " steps is shorter than receptive field " +
                          std::to_string(span + 1));
    }
    const std::size_t out_steps = steps - span;
    const std::size_t rows = out_steps * batch;

    std::vector<double> out(rows * c_out);
    {
        auto y = as_matrix(out, rows, c_out);
        y.rowwise() = ConstMapVec(bias.data().data(), static_cast<Eigen::Index>(c_out)).transpose();
        const auto& xv = x.node()->value;
        const auto& wv = weight.node()->value;
        for (std::size_t k = 0; k < width; ++k) {
            auto xk = as_matrix(xv, rows, c_in, k * dilation * batch * c_in);
            auto wk = as_matrix(wv, c_out, c_in, k * c_out * c_in);
            y.noalias() += xk * wk.transpose();
        }
    }

    auto backward = [=](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        auto dy = as_matrix(self.grad, rows, c_out);
        if (xn.requires_grad) {
            auto& gx = xn.grad_buffer();
            for (std::size_t k = 0; k < width; ++k) {
                auto dxk = as_matrix(gx, rows, c_in, k * dilation * batch * c_in);
                dxk.noalias() += dy * as_matrix(wn.value, c_out, c_in, k * c_out * c_in);
            }
        }
        if (wn.requires_grad) {
            auto& gw = wn.grad_buffer();
            for (std::size_t k = 0; k < width; ++k) {
                auto dwk = as_matrix(gw, c_out, c_in, k * c_out * c_in);
                dwk.noalias() += dy.transpose() * as_matrix(xn.value, rows, c_in, k * dilation * batch * c_in);
            }
        }
        if (bn.requires_grad) {
            accumulate_rows(bn.grad_buffer(), self.grad, rows, c_out);
        }
    };
    return detail::make_result({out_steps, batch, c_out}, std::move(out), {x, weight, bias}, backward);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.ndim() != 2) throw ConfigError("linear: weight must be [D_out, D_in]");
    const std::size_t d_out = weight.dim(0), d_in = weight.dim(1);
    if (x.shape().back() != d_in) {
        throw ConfigError("linear: input width " + std::to_string(x.shape().back()) + " does not match " +
                          std::to_string(d_in));
    }
    if (bias.numel() != d_out) throw ConfigError("linear: bias length does not match output width");
    const std::size_t rows = x.numel() / d_in;
    Shape out_shape = x.shape();
    out_shape.back() = d_out;

    std::vector<double> out(rows * d_out);
    {
        auto y = as_matrix(out, rows, d_out);
        y.rowwise() = ConstMapVec(bias.data().data(), static_cast<Eigen::Index>(d_out)).transpose();
        y.noalias() += as_matrix(x.node()->value, rows, d_in) * as_matrix(weight.node()->value, d_out, d_in).transpose();
    }
    auto backward = [=](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        auto dy = as_matrix(self.grad, rows, d_out);
        if (xn.requires_grad) {
            as_matrix(xn.grad_buffer(), rows, d_in).noalias() += dy * as_matrix(wn.value, d_out, d_in);
        }
        if (wn.requires_grad) {
            as_matrix(wn.grad_buffer(), d_out, d_in).noalias() += dy.transpose() * as_matrix(xn.value, rows, d_in);
        }
        if (bn.requires_grad) {
            accumulate_rows(bn.grad_buffer(), self.grad, rows, d_out);
        }
    };
    return detail::make_result(std::move(out_shape), std::move(out), {x, weight, bias}, backward);
}

Tensor leaky_relu(const Tensor& x, double slope) {
    const auto& in = x.node()->value;
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= 0.0 ? in[i] : slope * in[i];
    auto backward = [slope](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& gx = xn.grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xn.value[i] >= 0.0 ? self.grad[i] : slope * self.grad[i];
    };
    return detail::make_result(x.shape(), std::move(out), {x}, backward);
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState state, Mode mode) {
    if (x.ndim() < 2) throw ConfigError("batch_norm: input needs a batch and a channel axis");
    const std::size_t channels = x.shape().back();
    if (gamma.numel() != channels || beta.numel() != channels || state.running_mean.size() != channels ||
        state.running_var.size() != channels) {
        throw ConfigError("batch_norm: parameter length does not match " + std::to_string(channels) + " channels");
    }
    const std::size_t rows = x.numel() / channels;
    const auto& in = x.node()->value;
    const auto& g = gamma.node()->value;
    const auto& b = beta.node()->value;
    std::vector<double> out(in.size());

    if (mode == Mode::Eval) {
        std::vector<double> inv_std(channels);
        for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
        const std::vector<double> mean(state.running_mean.begin(), state.running_mean.end());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < channels; ++c) {
                out[r * channels + c] = g[c] * (in[r * channels + c] - mean[c]) * inv_std[c] + b[c];
            }
        }
        auto backward = [=](detail::Node& self) {
            auto& xn = *self.parents[0];
            auto& gn = *self.parents[1];
            auto& bn = *self.parents[2];
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t i = r * channels + c;
                    const double xhat = (xn.value[i] - mean[c]) * inv_std[c];
                    if (xn.requires_grad) xn.grad_buffer()[i] += self.grad[i] * gn.value[c] * inv_std[c];
                    if (gn.requires_grad) gn.grad_buffer()[c] += self.grad[i] * xhat;
                    if (bn.requires_grad) bn.grad_buffer()[c] += self.grad[i];
                }
            }
        };
        return detail::make_result(x.shape(), std::move(out), {x, gamma, beta}, backward);
    }

    const std::size_t batch = x.dim(x.ndim() - 2);
    if (batch < 2) throw ConfigError("batch_norm: train mode needs a batch of at least 2, got " + std::to_string(batch));

    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < channels; ++c) mean[c] += in[r * channels + c];
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double d = in[r * channels + c] - mean[c];
            var[c] += d * d;
        }
    }
    for (auto& v : var) v /= static_cast<double>(rows);

    std::vector<double> inv_std(channels);
    for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.eps);
    std::vector<double> xhat(in.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = r * channels + c;
            xhat[i] = (in[i] - mean[c]) * inv_std[c];
            out[i] = g[c] * xhat[i] + b[c];
        }
    }

    const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
    for (std::size_t c = 0; c < channels; ++c) {
        auto& rm = state.running_mean[c];
        auto& rv = state.running_var[c];
        rm = (1.0 - state.momentum) * rm + state.momentum * mean[c];
        rv = (1.0 - state.momentum) * rv + state.momentum * var[c] * unbias;
    }

    auto backward = [rows, channels, inv_std, xhat = std::move(xhat)](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t i = r * channels + c;
                sum_dy[c] += self.grad[i];
                sum_dy_xhat[c] += self.grad[i] * xhat[i];
            }
        }
        if (gn.requires_grad) {
            auto& gg = gn.grad_buffer();
            for (std::size_t c = 0; c < channels; ++c) gg[c] += sum_dy_xhat[c];
        }
        if (bn.requires_grad) {
            auto& gb = bn.grad_buffer();
            for (std::size_t c = 0; c < channels; ++c) gb[c] += sum_dy[c];
        }
        if (xn.requires_grad) {
            auto& gx = xn.grad_buffer();
            const double n = static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t i = r * channels + c;
                    gx[i] += gn.value[c] * inv_std[c] *
                             (self.grad[i] - sum_dy[c] / n - xhat[i] * sum_dy_xhat[c] / n);
                }
            }
        }
    };
    return detail::make_result(x.shape(), std::move(out), {x, gamma, beta}, std::move(backward));
}

Tensor dropout(const Tensor& x, double rate, Mode mode, const CounterRng& rng, std::uint64_t stream) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must lie in [0, 1)");
    if (mode == Mode::Eval || rate == 0.0) return x;
    const auto& in = x.node()->value;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(in.size());
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        mask[i] = rng.uniform(stream, i) >= rate ? keep_scale : 0.0;
        out[i] = in[i] * mask[i];
    }
    auto backward = [mask = std::move(mask)](detail::Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * mask[i];
    };
    return detail::make_result(x.shape(), std::move(out), {x}, std::move(backward));
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto& av = a.node()->value;
    const auto& bv = b.node()->value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    auto backward = [](detail::Node& self) {
        for (auto& parent : self.parents) {
            if (!parent->requires_grad) continue;
            auto& g = parent->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    };
    return detail::make_result(a.shape(), std::move(out), {a, b}, backward);
}

Tensor scale(const Tensor& x, double factor) {
    const auto& in = x.node()->value;
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * factor;
    auto backward = [factor](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    };
    return detail::make_result(x.shape(), std::move(out), {x}, backward);
}

Tensor square(const Tensor& x) {
    const auto& in = x.node()->value;
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * in[i];
    auto backward = [](detail::Node& self) {
        auto& xn = *self.parents[0];
        auto& g = xn.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * xn.value[i] * self.grad[i];
    };
    return detail::make_result(x.shape(), std::move(out), {x}, backward);
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    auto backward = [](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    };
    return detail::make_result({1}, {total}, {x}, backward);
}

Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ConfigError("concat_last: nothing to concatenate");
    Shape lead = parts.front().shape();
    lead.pop_back();
    const std::size_t rows = shape_numel(lead);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        Shape l = p.shape();
        l.pop_back();
        if (l != lead) throw ConfigError("concat_last: leading shapes differ");
        widths.push_back(p.shape().back());
        total += widths.back();
    }
    std::vector<double> out(rows * total);
    std::size_t col = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& v = parts[k].node()->value;
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * widths[k]), widths[k],
                        out.begin() + static_cast<std::ptrdiff_t>(r * total + col));
        }
        col += widths[k];
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    auto backward = [rows, total, widths](detail::Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            auto& parent = *self.parents[k];
            if (parent.requires_grad) {
                auto& g = parent.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c) g[r * widths[k] + c] += self.grad[r * total + offset + c];
            }
            offset += widths[k];
        }
    };
    return detail::make_result(std::move(out_shape), std::move(out), parts, backward);
}

Tensor slice_leading(const Tensor& x, std::size_t start, std::size_t length) {
    if (length == 0 || start + length > x.dim(0)) throw ConfigError("slice_leading: range out of bounds");
    const std::size_t inner = x.numel() / x.dim(0);
    const auto& in = x.node()->value;
    std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(start * inner),
                            in.begin() + static_cast<std::ptrdiff_t>((start + length) * inner));
    Shape shape = x.shape();
    shape[0] = length;
    auto backward = [offset = start * inner](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
    };
    return detail::make_result(std::move(shape), std::move(out), {x}, backward);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ConfigError("reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
    }
    auto backward = [](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
    return detail::make_result(std::move(shape), x.node()->value, {x}, backward);
}

Tensor select_columns(const Tensor& x, std::span<const std::size_t> source) {
    if (x.ndim() != 2) throw ConfigError("select_columns: input must be 2-D");
    const std::size_t rows = x.dim(0), c_in = x.dim(1), c_out = source.size();
    for (auto s : source) {
        if (s != kZeroColumn && s >= c_in) throw ConfigError("select_columns: source column out of range");
    }
    std::vector<std::size_t> map(source.begin(), source.end());
    const auto& in = x.node()->value;
    std::vector<double> out(rows * c_out, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < c_out; ++c)
            if (map[c] != kZeroColumn) out[r * c_out + c] = in[r * c_in + map[c]];
    auto backward = [rows, c_in, c_out, map](detail::Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < c_out; ++c)
                if (map[c] != kZeroColumn) g[r * c_in + map[c]] += self.grad[r * c_out + c];
    };
    return detail::make_result({rows, c_out}, std::move(out), {x}, backward);
}

Tensor mpjpe_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mpjpe_loss");
    if (pred.ndim() != 2 || pred.dim(1) % 3 != 0) throw ConfigError("mpjpe_loss: expected [B, 3J]");
    const std::size_t points = pred.numel() / 3;
    const auto& p = pred.node()->value;
    const auto& t = target.node()->value;
    std::vector<double> dist(points);
    double total = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
        const double dx = p[3 * k] - t[3 * k], dy = p[3 * k + 1] - t[3 * k + 1], dz = p[3 * k + 2] - t[3 * k + 2];
        dist[k] = std::sqrt(dx * dx + dy * dy + dz * dz);
        total += dist[k];
    }
    auto backward = [points, dist = std::move(dist)](detail::Node& self) {
        auto& pn = *self.parents[0];
        auto& tn = *self.parents[1];
        const double g = self.grad[0] / static_cast<double>(points);
        for (std::size_t k = 0; k < points; ++k) {
            if (dist[k] == 0.0) continue;
            for (std::size_t a = 0; a < 3; ++a) {
                const double d = (pn.value[3 * k + a] - tn.value[3 * k + a]) / dist[k] * g;
                if (pn.requires_grad) pn.grad_buffer()[3 * k + a] += d;
                if (tn.requires_grad) tn.grad_buffer()[3 * k + a] -= d;
            }
        }
    };
    return detail::make_result({1}, {total / static_cast<double>(points)}, {pred, target}, std::move(backward));
}

} // namespace poselift::nn
