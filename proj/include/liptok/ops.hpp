#pragma once

#include <span>

#include "liptok/tape.hpp"
#include "liptok/tensor.hpp"

namespace liptok {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Multiply by a compile-time constant (not a tensor).
Tensor scale(const Tensor& a, Scalar k);
// t[R,C] + bias[C], broadcast over rows. The only broadcasting rule supported.
Tensor add_rowwise(const Tensor& t, const Tensor& bias);

// C[m,n] = A[m,k] · B[k,n]. Backward: dA = dC·Bᵀ, dB = Aᵀ·dC.
Tensor matmul(const Tensor& a, const Tensor& b);
// C[m,n] = A[m,k] · B[n,k]ᵀ. Saves materializing transposes in attention and
// row-major linear layers.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& t);
// ln(1 + e^x), computed as max(x,0) + log1p(e^-|x|).
Tensor softplus(const Tensor& t);
// Row-wise softmax over a square score matrix with strictly-upper-triangular
// entries masked to exactly zero probability.
Tensor softmax_causal(const Tensor& scores);
// Per-row normalization over the last dimension (eps = 1e-5), then affine.
Tensor layernorm(const Tensor& t, const Tensor& gain, const Tensor& bias);
// Forward identity, zero gradient to the input.
Tensor stop_gradient(const Tensor& t);

Tensor sum(const Tensor& t);   // all elements -> scalar
Tensor mean(const Tensor& t);  // all elements -> scalar

// Stack rank-1 tensors of equal width into [n, d].
Tensor stack_rows(std::span<const Tensor> rows);
// Copy of row r of a rank-2 tensor; backward scatters into that row.
Tensor select_row(const Tensor& t, std::size_t row);
// Concatenate rank-2 tensors with equal row counts along columns.
Tensor concat_cols(std::span<const Tensor> parts);

// Mean over rows of the squared L2 distance between a and b (rank-1 inputs
// count as one row). The shared building block for reconstruction, codebook,
// commitment and behavior-cloning losses.
inline Tensor mse_rows(const Tensor& a, const Tensor& b) {
    const Tensor d = sub(a, b);
    const std::size_t rows = d.rank() == 2 ? d.dim(0) : 1;
    return scale(sum(mul(d, d)), Scalar{1} / static_cast<Scalar>(rows));
}

namespace detail {
// Raw row-major GEMM kernels (C += ...), shared by forward and backward paths.
void gemm_nn(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k, std::size_t n);
}  // namespace detail

}  // namespace liptok
