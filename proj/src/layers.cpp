#include "liptok/layers.hpp"

#include <cmath>

namespace liptok {

namespace {

// Tolerance on the rescale trigger. Rows whose absolute sum is within this
// relative slack of the bound are left untouched, which makes normalization
// exactly idempotent: a freshly rescaled row re-sums to the bound only up to
// accumulation rounding, well inside this margin.
constexpr Scalar kRescaleSlack = Scalar{1e-12};

Scalar stable_softplus(Scalar x) {
    return std::max(x, Scalar{0}) + std::log1p(std::exp(-std::abs(x)));
}

Scalar sigmoid(Scalar x) { return Scalar{1} / (Scalar{1} + std::exp(-x)); }

}  // namespace

Scalar softplus_inverse(Scalar y) {
    if (y <= Scalar{0}) throw UsageError("softplus_inverse: argument must be positive");
    // ln(e^y - 1); for large y this is y + ln(1 - e^-y).
    if (y > Scalar{30}) return y + std::log1p(-std::exp(-y));
    return std::log(std::expm1(y));
}

Tensor lipschitz_normalize(const Tensor& weight, const Tensor& raw_bound) {
    if (weight.rank() != 2) {
        throw ShapeError("lipschitz_normalize: weight must be rank-2, got " +
                         shape_to_string(weight.shape()));
    }
    if (raw_bound.numel() != 1) {
        throw ShapeError("lipschitz_normalize: bound must be scalar");
    }
    const std::size_t rows = weight.dim(0), cols = weight.dim(1);
    const Scalar c = raw_bound[0];
    const Scalar sp = stable_softplus(c);
    const bool rec = grad_needed({&weight, &raw_bound});
    Tensor out = Tensor::zeros(weight.shape(), rec);

    std::vector<Scalar> row_sum(rows);
    std::vector<bool> scaled(rows, false);
    for (std::size_t r = 0; r < rows; ++r) {
        Scalar s{0};
        for (std::size_t j = 0; j < cols; ++j) s += std::abs(weight[r * cols + j]);
        row_sum[r] = s;
        if (s > sp * (Scalar{1} + kRescaleSlack)) {
            scaled[r] = true;
            const Scalar kappa = sp / s;
            for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = weight[r * cols + j] * kappa;
        } else {
            for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = weight[r * cols + j];
        }
    }
    if (rec) {
        Tape::active().push([wn = weight.node(), cn = raw_bound.node(), on = out.node(),
                             row_sum = std::move(row_sum), scaled = std::move(scaled), sp, c,
                             rows, cols] {
            Scalar dc{0};
            for (std::size_t r = 0; r < rows; ++r) {
                const Scalar* dy = on->grad.data() + r * cols;
                const Scalar* w = wn->data.data() + r * cols;
                if (!scaled[r]) {
                    if (wn->requires_grad)
                        for (std::size_t j = 0; j < cols; ++j) wn->grad[r * cols + j] += dy[j];
                    continue;
                }
                const Scalar s = row_sum[r];
                const Scalar kappa = sp / s;
                Scalar dot{0};
                for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * w[j];
                if (wn->requires_grad) {
                    for (std::size_t j = 0; j < cols; ++j) {
                        const Scalar sgn =
                            w[j] > Scalar{0} ? Scalar{1} : (w[j] < Scalar{0} ? Scalar{-1} : Scalar{0});
                        wn->grad[r * cols + j] += kappa * (dy[j] - sgn * dot / s);
                    }
                }
                dc += dot / s;
            }
            if (cn->requires_grad) cn->grad[0] += dc * sigmoid(c);
        });
    }
    return out;
}

LinearLayer LinearLayer::init(std::size_t in, std::size_t out, Rng& rng) {
    const Scalar bound = Scalar{1} / std::sqrt(static_cast<Scalar>(in));
    LinearLayer layer;
    layer.weight = Tensor::uniform({out, in}, rng, -bound, bound, true);
    layer.bias = Tensor::zeros({out}, true);
    return layer;
}

Tensor LinearLayer::forward(const Tensor& x) const {
    return add_rowwise(matmul_nt(x, weight), bias);
}

LipschitzLinear LipschitzLinear::init(std::size_t in, std::size_t out, Rng& rng) {
    const Scalar bound = Scalar{1} / std::sqrt(static_cast<Scalar>(in));
    LipschitzLinear layer;
    layer.weight = Tensor::uniform({out, in}, rng, -bound, bound, true);
    layer.bias = Tensor::zeros({out}, true);
    Scalar max_row_sum{0};
    for (std::size_t r = 0; r < out; ++r) {
        Scalar s{0};
        for (std::size_t j = 0; j < in; ++j) s += std::abs(layer.weight[r * in + j]);
        max_row_sum = std::max(max_row_sum, s);
    }
    layer.raw_bound = Tensor::scalar(softplus_inverse(std::max(max_row_sum, Scalar{1e-3})), true);
    return layer;
}

Tensor LipschitzLinear::effective_weight() const {
    return lipschitz_normalize(weight, raw_bound);
}

Tensor LipschitzLinear::forward(const Tensor& x) const {
    return add_rowwise(matmul_nt(x, effective_weight()), bias);
}

Scalar LipschitzLinear::bound() const { return stable_softplus(raw_bound[0]); }

MLPStack MLPStack::init(const std::vector<std::size_t>& dims, bool lipschitz, Rng& rng) {
    if (dims.size() < 2) throw UsageError("MLPStack: need at least in and out dims");
    MLPStack stack;
    stack.lipschitz_constrained = lipschitz;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (lipschitz) {
            stack.constrained.push_back(LipschitzLinear::init(dims[i], dims[i + 1], rng));
        } else {
            stack.plain.push_back(LinearLayer::init(dims[i], dims[i + 1], rng));
        }
    }
    return stack;
}

Tensor MLPStack::forward(const Tensor& x) const {
    Tensor h = x;
    const std::size_t n = layer_count();
    for (std::size_t i = 0; i < n; ++i) {
        h = lipschitz_constrained ? constrained[i].forward(h) : plain[i].forward(h);
        if (i + 1 < n) h = relu(h);
    }
    return h;
}

std::size_t MLPStack::layer_count() const {
    return lipschitz_constrained ? constrained.size() : plain.size();
}

std::size_t MLPStack::in_dim() const {
    return lipschitz_constrained ? constrained.front().weight.dim(1) : plain.front().weight.dim(1);
}

std::size_t MLPStack::out_dim() const {
    return lipschitz_constrained ? constrained.back().weight.dim(0) : plain.back().weight.dim(0);
}

Scalar MLPStack::network_lipschitz_bound() const {
    if (!lipschitz_constrained) {
        throw UsageError("network_lipschitz_bound on unconstrained stack");
    }
    Scalar prod{1};
    for (const LipschitzLinear& l : constrained) prod *= l.bound();
    return prod;
}

Tensor MLPStack::lipschitz_loss() const {
    if (!lipschitz_constrained) {
        throw UsageError("lipschitz_loss on unconstrained stack");
    }
    Tensor prod = softplus(constrained.front().raw_bound);
    for (std::size_t i = 1; i < constrained.size(); ++i) {
        prod = mul(prod, softplus(constrained[i].raw_bound));
    }
    return prod;
}

std::vector<NamedParam> MLPStack::params(const std::string& prefix) const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layer_count(); ++i) {
        const std::string base = prefix + ".layer" + std::to_string(i);
        if (lipschitz_constrained) {
            out.push_back({base + ".weight", constrained[i].weight});
            out.push_back({base + ".bias", constrained[i].bias});
            out.push_back({base + ".raw_bound", constrained[i].raw_bound});
        } else {
            out.push_back({base + ".weight", plain[i].weight});
            out.push_back({base + ".bias", plain[i].bias});
        }
    }
    return out;
}

}  // namespace liptok
