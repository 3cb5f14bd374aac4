#pragma once

#include <cstdint>
#include <vector>

#include "liptok/ops.hpp"

namespace liptok {

// The K×D embedding table. Entries train through the codebook loss; usage
// counts are a diagnostic only (dead entries are never reseeded).
struct Codebook {
    Tensor entries;  // [K, D], trainable
    std::vector<std::int64_t> usage;

    static Codebook init(std::size_t k, std::size_t d, Rng& rng);
    std::size_t size() const { return entries.dim(0); }
    std::size_t dim() const { return entries.dim(1); }
};

struct QuantizationResult {
    Tensor quantized;                // [B, D]; values equal the selected entries
    std::vector<std::size_t> indices;
    Tensor codebook_loss;            // scalar
    Tensor commitment_loss;          // scalar
};

// Straight-through estimator: the forward value is an exact copy of `values`,
// the backward pass copies the output gradient verbatim onto `grad_target`.
// `values` itself receives no gradient through this op.
Tensor straight_through(const Tensor& values, const Tensor& grad_target);

// Nearest-entry lookup under squared L2, ties broken by lowest index. Forward
// output is the codebook entry; the backward pass copies the output gradient
// straight through to the encoder latents. Losses are batch means.
QuantizationResult vq_lookup(Codebook& codebook, const Tensor& latents);

// Lookup-free sign quantization onto {-1,+1}^D with sign(0) = +1. The index is
// the sign pattern read as binary with dimension 0 as the most significant
// bit. No explicit table, so codebook_loss is 0.
QuantizationResult lfq_quantize(const Tensor& latents);

// Per-dimension uniform binning.
struct BinSpec {
    int bins_per_dim = 256;
    std::vector<std::pair<Scalar, Scalar>> range;  // per-dimension [lo, hi)

    static BinSpec uniform(std::size_t dims, int bins = 256, Scalar lo = -1, Scalar hi = 1);
};

// Encode clamps out-of-range values to the edge bins; decode returns bin
// centers. encode∘decode∘encode == encode.
std::vector<int> bin_encode(std::span<const Scalar> action, const BinSpec& spec);
std::vector<Scalar> bin_decode(std::span<const int> indices, const BinSpec& spec);

// exp(entropy) of the empirical usage distribution, in [1, K].
Scalar codebook_perplexity(const Codebook& codebook);

}  // namespace liptok
