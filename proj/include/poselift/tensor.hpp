#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace poselift::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents.
    std::function<void(Node&)> backward;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

} // namespace detail

// Dense row-major tensor of doubles with an optional reverse-mode tape.
//
// Tensors share their storage on copy. Values never change after creation
// except through mutable_data(), which is reserved for parameter
// initialization, optimizer updates and checkpoint loading.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    // Empty span when no gradient has been accumulated.
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    // Reverse-mode sweep from a scalar. Each recorded node is visited once.
    void backward() const;

    // Same storage, no tape. Used to feed values into a fresh graph.
    Tensor detach() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// While alive, newly created op results do not record a tape.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

namespace detail {

// Builds an op result. Parents are kept (and the backward closure attached)
// only when grad mode is on and at least one parent requires grad.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

} // namespace detail

} // namespace poselift::nn
