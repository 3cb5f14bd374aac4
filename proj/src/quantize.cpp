#include "liptok/quantize.hpp"

#include <cmath>

namespace liptok {

Tensor straight_through(const Tensor& values, const Tensor& grad_target) {
    if (values.shape() != grad_target.shape()) {
        throw ShapeError("straight_through: shape mismatch " + shape_to_string(values.shape()) +
                         " vs " + shape_to_string(grad_target.shape()));
    }
    const bool rec = grad_needed({&grad_target});
    Tensor out = Tensor::zeros(values.shape(), rec);
    std::copy(values.values().begin(), values.values().end(), out.values().begin());
    if (rec) {
        Tape::active().push([tn = grad_target.node(), on = out.node()] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) tn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Codebook Codebook::init(std::size_t k, std::size_t d, Rng& rng) {
    if (k < 2 || d < 1) throw UsageError("Codebook: need K >= 2 and D >= 1");
    Codebook cb;
    const Scalar bound = Scalar{1} / static_cast<Scalar>(k);
    cb.entries = Tensor::uniform({k, d}, rng, -bound, bound, true);
    cb.usage.assign(k, 0);
    return cb;
}

QuantizationResult vq_lookup(Codebook& codebook, const Tensor& latents) {
    if (latents.rank() != 2 || latents.dim(1) != codebook.dim()) {
        throw ShapeError("vq_lookup: latents " + shape_to_string(latents.shape()) +
                         " incompatible with codebook dim " + std::to_string(codebook.dim()));
    }
    const std::size_t batch = latents.dim(0), d = codebook.dim(), k = codebook.size();
    QuantizationResult res;
    if (batch == 0) {
        res.quantized = Tensor::zeros({0, d});
        res.codebook_loss = Tensor::scalar(0);
        res.commitment_loss = Tensor::scalar(0);
        return res;
    }
    res.indices.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const Scalar* x = latents.values().data() + b * d;
        Scalar best = std::numeric_limits<Scalar>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const Scalar* e = codebook.entries.values().data() + j * d;
            Scalar dist{0};
            for (std::size_t c = 0; c < d; ++c) dist += (x[c] - e[c]) * (x[c] - e[c]);
            if (dist < best) {  // strict: ties keep the lowest index
                best = dist;
                best_idx = j;
            }
        }
        res.indices[b] = best_idx;
        ++codebook.usage[best_idx];
    }
    // Selected entries, differentiable w.r.t. the codebook (scatter backward).
    std::vector<Tensor> rows;
    rows.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) rows.push_back(select_row(codebook.entries, res.indices[b]));
    const Tensor selected = stack_rows(rows);
    // Forward value is an exact copy of the entries; the gradient is copied
    // verbatim onto the encoder latents and never reaches the codebook.
    res.quantized = straight_through(selected, latents);
    res.codebook_loss = mse_rows(stop_gradient(latents), selected);
    res.commitment_loss = mse_rows(latents, stop_gradient(selected));
    return res;
}

QuantizationResult lfq_quantize(const Tensor& latents) {
    if (latents.rank() != 2) {
        throw ShapeError("lfq_quantize: expected [batch, D], got " + shape_to_string(latents.shape()));
    }
    const std::size_t batch = latents.dim(0), d = latents.dim(1);
    if (d > 30) {
        throw UsageError("lfq_quantize: D=" + std::to_string(d) +
                         " overflows the implicit 2^D index space (max 30)");
    }
    QuantizationResult res;
    if (batch == 0) {
        res.quantized = Tensor::zeros({0, d});
        res.codebook_loss = Tensor::scalar(0);
        res.commitment_loss = Tensor::scalar(0);
        return res;
    }
    Tensor signs = Tensor::zeros({batch, d});
    res.indices.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t idx = 0;
        for (std::size_t c = 0; c < d; ++c) {
            const bool positive = latents[b * d + c] >= Scalar{0};  // sign(0) = +1
            signs[b * d + c] = positive ? Scalar{1} : Scalar{-1};
            idx = (idx << 1) | (positive ? 1u : 0u);
        }
        res.indices[b] = idx;
    }
    res.quantized = straight_through(signs, latents);
    res.codebook_loss = Tensor::scalar(0);
    res.commitment_loss = mse_rows(latents, signs);
    return res;
}

BinSpec BinSpec::uniform(std::size_t dims, int bins, Scalar lo, Scalar hi) {
    if (bins < 2) throw UsageError("BinSpec: bins_per_dim must be >= 2");
    if (!(lo < hi)) throw UsageError("BinSpec: lo must be < hi");
    BinSpec spec;
    spec.bins_per_dim = bins;
    spec.range.assign(dims, {lo, hi});
    return spec;
}

std::vector<int> bin_encode(std::span<const Scalar> action, const BinSpec& spec) {
    if (action.size() != spec.range.size()) {
        throw ShapeError("bin_encode: action dim " + std::to_string(action.size()) +
                         " vs spec dim " + std::to_string(spec.range.size()));
    }
    std::vector<int> out(action.size());
    for (std::size_t i = 0; i < action.size(); ++i) {
        const auto [lo, hi] = spec.range[i];
        const Scalar t = (action[i] - lo) / (hi - lo) * static_cast<Scalar>(spec.bins_per_dim);
        int bin = static_cast<int>(std::floor(t));
        bin = std::max(0, std::min(spec.bins_per_dim - 1, bin));
        out[i] = bin;
    }
    return out;
}

std::vector<Scalar> bin_decode(std::span<const int> indices, const BinSpec& spec) {
    if (indices.size() != spec.range.size()) {
        throw ShapeError("bin_decode: index count " + std::to_string(indices.size()) +
                         " vs spec dim " + std::to_string(spec.range.size()));
    }
    std::vector<Scalar> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto [lo, hi] = spec.range[i];
        const Scalar width = (hi - lo) / static_cast<Scalar>(spec.bins_per_dim);
        out[i] = lo + (static_cast<Scalar>(indices[i]) + Scalar{0.5}) * width;
    }
    return out;
}

Scalar codebook_perplexity(const Codebook& codebook) {
    std::int64_t total = 0;
    for (std::int64_t u : codebook.usage) total += u;
    if (total == 0) throw UsageError("codebook_perplexity: no recorded usage");
    Scalar entropy{0};
    for (std::int64_t u : codebook.usage) {
        if (u == 0) continue;
        const Scalar p = static_cast<Scalar>(u) / static_cast<Scalar>(total);
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

}  // namespace liptok
