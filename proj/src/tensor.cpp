#include "liptok/tensor.hpp"

#include <numeric>

namespace liptok {

std::string shape_to_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = std::make_shared<detail::TensorNode>();
    const std::size_t n = shape_numel(shape);
    node->shape = std::move(shape);
    node->data.assign(n, Scalar{0});
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(n, Scalar{0});
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (Scalar& v : t.node_->data) v = value;
    return t;
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->data.size(), Scalar{0});
    return Tensor(std::move(node));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, Scalar lo, Scalar hi, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (Scalar& v : t.node_->data) v = static_cast<Scalar>(rng.uniform(lo, hi));
    return t;
}

Scalar Tensor::value() const {
    if (numel() != 1) {
        throw UsageError("value() called on non-scalar tensor of shape " + shape_to_string(shape()));
    }
    return node_->data[0];
}

std::span<Scalar> Tensor::grad() {
    if (!requires_grad()) throw UsageError("grad() on tensor without requires_grad");
    return node_->grad;
}

std::span<const Scalar> Tensor::grad() const {
    if (!requires_grad()) throw UsageError("grad() on tensor without requires_grad");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (requires_grad()) node_->grad.assign(node_->data.size(), Scalar{0});
}

void Tensor::set_requires_grad(bool requires_grad) {
    node_->requires_grad = requires_grad;
    if (requires_grad) {
        node_->grad.assign(node_->data.size(), Scalar{0});
    } else {
        node_->grad.clear();
    }
}

Tensor Tensor::clone() const {
    return Tensor::from(node_->shape, node_->data, node_->requires_grad);
}

}  // namespace liptok
