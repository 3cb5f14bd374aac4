#pragma once

#include <vector>

#include "liptok/ops.hpp"
#include "liptok/optim.hpp"

namespace liptok {

// Row-wise weight normalization: row i of W is rescaled by
// min(1, softplus(c) / sum_j |W[i,j]|), so every row's absolute sum stays
// within the trainable bound softplus(c). Rows already inside the bound (and
// all-zero rows) pass through bit-for-bit. Differentiable w.r.t. both W and c.
Tensor lipschitz_normalize(const Tensor& weight, const Tensor& raw_bound);

// Inverse of softplus, ln(e^y - 1), used to initialize raw bounds.
Scalar softplus_inverse(Scalar y);

struct LinearLayer {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    static LinearLayer init(std::size_t in, std::size_t out, Rng& rng);
    // x[B,in] -> x·Wᵀ + b
    Tensor forward(const Tensor& x) const;
};

// Linear layer whose effective weight is lipschitz_normalize(weight, raw_bound),
// recomputed from the raw weight on every forward pass. The per-layer
// ∞-norm Lipschitz bound is softplus(raw_bound).
struct LipschitzLinear {
    Tensor weight;     // [out, in]
    Tensor bias;       // [out]
    Tensor raw_bound;  // scalar c, trainable

    // raw_bound starts at softplus⁻¹(max absolute row sum), so normalization
    // begins as a no-op and does not destroy the init scale.
    static LipschitzLinear init(std::size_t in, std::size_t out, Rng& rng);
    Tensor effective_weight() const;
    Tensor forward(const Tensor& x) const;
    Scalar bound() const;  // softplus(raw_bound), off-tape
};

// Stack of linear layers with ReLU between them (none after the last). Either
// every layer is Lipschitz-constrained or none is.
struct MLPStack {
    bool lipschitz_constrained = false;
    std::vector<LinearLayer> plain;
    std::vector<LipschitzLinear> constrained;

    // dims = {in, hidden..., out}
    static MLPStack init(const std::vector<std::size_t>& dims, bool lipschitz, Rng& rng);

    Tensor forward(const Tensor& x) const;
    std::size_t layer_count() const;
    std::size_t in_dim() const;
    std::size_t out_dim() const;

    // Product of per-layer bounds softplus(c_l). Errors on unconstrained stacks.
    Scalar network_lipschitz_bound() const;
    // Same product as a differentiable scalar; gradient reaches every c_l.
    Tensor lipschitz_loss() const;

    std::vector<NamedParam> params(const std::string& prefix) const;
};

}  // namespace liptok
