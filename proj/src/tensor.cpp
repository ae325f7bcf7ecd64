#include "poselift/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "poselift/errors.hpp"

namespace poselift::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto extent : shape) n *= extent;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    for (auto extent : shape) {
        if (extent == 0) throw ConfigError("tensor extents must be positive, got " + shape_string(shape));
    }
}

} // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    auto node = std::make_shared<detail::Node>();
    node->value.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_shape(shape);
    if (values.size() != shape_numel(shape)) {
        throw ConfigError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                          shape_string(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const { return node_->shape.at(axis); }

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
    if (numel() != 1) throw ConfigError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }

std::span<const double> Tensor::grad() const { return node_->grad; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::Node>();
    node->shape = node_->shape;
    node->value = node_->value;
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    if (numel() != 1) throw ConfigError("backward() requires a scalar, got " + shape_string(shape()));
    if (!node_->requires_grad) throw ConfigError("backward() on a tensor that does not require grad");

    // Iterative post-order DFS gives a topological order of the tape.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

} // namespace detail

} // namespace poselift::nn
