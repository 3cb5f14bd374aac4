#pragma once

#include <memory>
#include <span>
#include <vector>

#include "liptok/common.hpp"
#include "liptok/rng.hpp"

namespace liptok {

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<Scalar> data;
    std::vector<Scalar> grad;  // allocated iff requires_grad
    bool requires_grad = false;
};

}  // namespace detail

// Dense row-major tensor with optional gradient buffer. Copies are shallow:
// a Tensor is a handle onto a shared node, which is what lets the tape keep
// operands alive across the backward pass.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
    static Tensor scalar(Scalar value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<Scalar> data, bool requires_grad = false);
    // Uniform init in [lo, hi), the default weight-init primitive.
    static Tensor uniform(Shape shape, Rng& rng, Scalar lo, Scalar hi, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    std::span<Scalar> values() { return node_->data; }
    std::span<const Scalar> values() const { return node_->data; }
    Scalar value() const;  // numel()==1 convenience
    Scalar& operator[](std::size_t i) { return node_->data[i]; }
    Scalar operator[](std::size_t i) const { return node_->data[i]; }
    // 2-d convenience accessors.
    Scalar at(std::size_t r, std::size_t c) const { return node_->data[r * node_->shape[1] + c]; }
    Scalar& at(std::size_t r, std::size_t c) { return node_->data[r * node_->shape[1] + c]; }

    std::span<Scalar> grad();
    std::span<const Scalar> grad() const;
    void zero_grad();
    void set_requires_grad(bool requires_grad);

    // Deep copy of values (fresh node, grads not copied).
    Tensor clone() const;

    const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

}  // namespace liptok
