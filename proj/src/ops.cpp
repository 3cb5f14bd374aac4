#include "liptok/ops.hpp"

#include <cmath>
#include <vector>

namespace liptok {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

Scalar sigmoid(Scalar x) { return Scalar{1} / (Scalar{1} + std::exp(-x)); }

}  // namespace

namespace detail {

void gemm_nn(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const Scalar* arow = a + i * k;
        Scalar* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const Scalar av = arow[p];
            if (av == Scalar{0}) continue;
            const Scalar* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k, std::size_t n) {
    // c[m,n] += a[m,k] · b[n,k]ᵀ — contiguous dot products.
    for (std::size_t i = 0; i < m; ++i) {
        const Scalar* arow = a + i * k;
        Scalar* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const Scalar* brow = b + j * k;
            Scalar acc{0};
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void gemm_tn(const Scalar* a, const Scalar* b, Scalar* c, std::size_t m, std::size_t k, std::size_t n) {
    // c[m,n] += a[k,m]ᵀ · b[k,n]
    for (std::size_t p = 0; p < k; ++p) {
        const Scalar* arow = a + p * m;
        const Scalar* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const Scalar av = arow[i];
            if (av == Scalar{0}) continue;
            Scalar* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const bool rec = grad_needed({&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
    if (rec) {
        Tape::active().push([an = a.node(), bn = b.node(), on = out.node()] {
            const std::size_t n = on->data.size();
            if (an->requires_grad)
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const bool rec = grad_needed({&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
    if (rec) {
        Tape::active().push([an = a.node(), bn = b.node(), on = out.node()] {
            const std::size_t n = on->data.size();
            if (an->requires_grad)
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const bool rec = grad_needed({&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
    if (rec) {
        Tape::active().push([an = a.node(), bn = b.node(), on = out.node()] {
            const std::size_t n = on->data.size();
            if (an->requires_grad)
                for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->data[i];
            if (bn->requires_grad)
                for (std::size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->data[i];
        });
    }
    return out;
}

Tensor scale(const Tensor& a, Scalar k) {
    const bool rec = grad_needed({&a});
    Tensor out = Tensor::zeros(a.shape(), rec);
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * k;
    if (rec) {
        Tape::active().push([an = a.node(), on = out.node(), k] {
            const std::size_t n = on->data.size();
            for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * k;
        });
    }
    return out;
}

Tensor add_rowwise(const Tensor& t, const Tensor& bias) {
    if (t.rank() != 2 || bias.rank() != 1 || t.dim(1) != bias.dim(0)) {
        throw ShapeError("add_rowwise: incompatible shapes " + shape_to_string(t.shape()) +
                         " vs " + shape_to_string(bias.shape()));
    }
    const bool rec = grad_needed({&t, &bias});
    Tensor out = Tensor::zeros(t.shape(), rec);
    const std::size_t rows = t.dim(0), cols = t.dim(1);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = t[r * cols + c] + bias[c];
    if (rec) {
        Tape::active().push([tn = t.node(), bn = bias.node(), on = out.node(), rows, cols] {
            if (tn->requires_grad)
                for (std::size_t i = 0; i < rows * cols; ++i) tn->grad[i] += on->grad[i];
            if (bn->requires_grad)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) bn->grad[c] += on->grad[r * cols + c];
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const bool rec = grad_needed({&a, &b});
    Tensor out = Tensor::zeros({m, n}, rec);
    detail::gemm_nn(a.values().data(), b.values().data(), out.values().data(), m, k, n);
    if (rec) {
        Tape::active().push([an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
            if (an->requires_grad)
                detail::gemm_nt(on->grad.data(), bn->data.data(), an->grad.data(), m, n, k);
            if (bn->requires_grad)
                detail::gemm_tn(an->data.data(), on->grad.data(), bn->grad.data(), k, m, n);
        });
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw ShapeError("matmul_nt: incompatible shapes " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    const bool rec = grad_needed({&a, &b});
    Tensor out = Tensor::zeros({m, n}, rec);
    detail::gemm_nt(a.values().data(), b.values().data(), out.values().data(), m, k, n);
    if (rec) {
        Tape::active().push([an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
            // dA += dC·B ; dB += dCᵀ·A
            if (an->requires_grad)
                detail::gemm_nn(on->grad.data(), bn->data.data(), an->grad.data(), m, n, k);
            if (bn->requires_grad)
                detail::gemm_tn(on->grad.data(), an->data.data(), bn->grad.data(), n, m, k);
        });
    }
    return out;
}

Tensor relu(const Tensor& t) {
    const bool rec = grad_needed({&t});
    Tensor out = Tensor::zeros(t.shape(), rec);
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i) out[i] = t[i] > Scalar{0} ? t[i] : Scalar{0};
    if (rec) {
        Tape::active().push([tn = t.node(), on = out.node()] {
            const std::size_t n = on->data.size();
            // Subgradient at exactly 0 is 0.
            for (std::size_t i = 0; i < n; ++i)
                if (tn->data[i] > Scalar{0}) tn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor softplus(const Tensor& t) {
    const bool rec = grad_needed({&t});
    Tensor out = Tensor::zeros(t.shape(), rec);
    const std::size_t n = t.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar x = t[i];
        out[i] = std::max(x, Scalar{0}) + std::log1p(std::exp(-std::abs(x)));
    }
    if (rec) {
        Tape::active().push([tn = t.node(), on = out.node()] {
            const std::size_t n = on->data.size();
            for (std::size_t i = 0; i < n; ++i) tn->grad[i] += on->grad[i] * sigmoid(tn->data[i]);
        });
    }
    return out;
}

Tensor softmax_causal(const Tensor& scores) {
    if (scores.rank() != 2 || scores.dim(0) != scores.dim(1)) {
        throw ShapeError("softmax_causal: expected square matrix, got " +
                         shape_to_string(scores.shape()));
    }
    const std::size_t T = scores.dim(0);
    const bool rec = grad_needed({&scores});
    Tensor out = Tensor::zeros({T, T}, rec);
    for (std::size_t r = 0; r < T; ++r) {
        Scalar mx = scores.at(r, 0);
        for (std::size_t c = 1; c <= r; ++c) mx = std::max(mx, scores.at(r, c));
        Scalar denom{0};
        for (std::size_t c = 0; c <= r; ++c) {
            const Scalar e = std::exp(scores.at(r, c) - mx);
            out.at(r, c) = e;
            denom += e;
        }
        for (std::size_t c = 0; c <= r; ++c) out.at(r, c) /= denom;
        // columns > r stay exactly 0
    }
    if (rec) {
        Tape::active().push([sn = scores.node(), on = out.node(), T] {
            for (std::size_t r = 0; r < T; ++r) {
                Scalar dot{0};
                for (std::size_t c = 0; c <= r; ++c)
                    dot += on->data[r * T + c] * on->grad[r * T + c];
                for (std::size_t c = 0; c <= r; ++c) {
                    const Scalar p = on->data[r * T + c];
                    sn->grad[r * T + c] += p * (on->grad[r * T + c] - dot);
                }
            }
        });
    }
    return out;
}

Tensor layernorm(const Tensor& t, const Tensor& gain, const Tensor& bias) {
    const std::size_t d = t.rank() >= 1 ? t.dim(t.rank() - 1) : 0;
    if (t.rank() < 1 || t.rank() > 2 || gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
        throw ShapeError("layernorm: incompatible shapes " + shape_to_string(t.shape()) + ", " +
                         shape_to_string(gain.shape()) + ", " + shape_to_string(bias.shape()));
    }
    constexpr Scalar kEps = Scalar{1e-5};
    const std::size_t rows = t.rank() == 2 ? t.dim(0) : 1;
    const bool rec = grad_needed({&t, &gain, &bias});
    Tensor out = Tensor::zeros(t.shape(), rec);
    std::vector<Scalar> xhat(rows * d), inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const Scalar* x = t.values().data() + r * d;
        Scalar mu{0};
        for (std::size_t c = 0; c < d; ++c) mu += x[c];
        mu /= static_cast<Scalar>(d);
        Scalar var{0};
        for (std::size_t c = 0; c < d; ++c) var += (x[c] - mu) * (x[c] - mu);
        var /= static_cast<Scalar>(d);
        const Scalar is = Scalar{1} / std::sqrt(var + kEps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < d; ++c) {
            const Scalar xh = (x[c] - mu) * is;
            xhat[r * d + c] = xh;
            out[r * d + c] = xh * gain[c] + bias[c];
        }
    }
    if (rec) {
        Tape::active().push([tn = t.node(), gn = gain.node(), bn = bias.node(), on = out.node(),
                             xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d] {
            for (std::size_t r = 0; r < rows; ++r) {
                const Scalar* dy = on->grad.data() + r * d;
                const Scalar* xh = xhat.data() + r * d;
                if (gn->requires_grad)
                    for (std::size_t c = 0; c < d; ++c) gn->grad[c] += dy[c] * xh[c];
                if (bn->requires_grad)
                    for (std::size_t c = 0; c < d; ++c) bn->grad[c] += dy[c];
                if (tn->requires_grad) {
                    Scalar mean_dxh{0}, mean_dxh_xh{0};
                    for (std::size_t c = 0; c < d; ++c) {
                        const Scalar dxh = dy[c] * gn->data[c];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[c];
                    }
                    mean_dxh /= static_cast<Scalar>(d);
                    mean_dxh_xh /= static_cast<Scalar>(d);
                    for (std::size_t c = 0; c < d; ++c) {
                        const Scalar dxh = dy[c] * gn->data[c];
                        tn->grad[r * d + c] += inv_std[r] * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
                    }
                }
            }
        });
    }
    return out;
}

Tensor stop_gradient(const Tensor& t) {
    return Tensor::from(t.shape(), {t.values().begin(), t.values().end()}, false);
}

Tensor sum(const Tensor& t) {
    const bool rec = grad_needed({&t});
    Scalar acc{0};
    for (std::size_t i = 0; i < t.numel(); ++i) acc += t[i];
    Tensor out = Tensor::scalar(acc, rec);
    if (rec) {
        Tape::active().push([tn = t.node(), on = out.node()] {
            const Scalar g = on->grad[0];
            for (Scalar& gi : tn->grad) gi += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& t) {
    if (t.numel() == 0) throw UsageError("mean of empty tensor");
    return scale(sum(t), Scalar{1} / static_cast<Scalar>(t.numel()));
}

Tensor stack_rows(std::span<const Tensor> rows) {
    if (rows.empty()) throw UsageError("stack_rows: empty input");
    const std::size_t d = rows[0].numel();
    bool any_grad = false;
    for (const Tensor& r : rows) {
        if (r.rank() != 1 || r.numel() != d) {
            throw ShapeError("stack_rows: rows must be rank-1 of equal width");
        }
        any_grad |= r.requires_grad();
    }
    const bool rec = Tape::active().recording() && any_grad;
    Tensor out = Tensor::zeros({rows.size(), d}, rec);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) out[r * d + c] = rows[r][c];
    if (rec) {
        std::vector<std::shared_ptr<detail::TensorNode>> nodes;
        nodes.reserve(rows.size());
        for (const Tensor& r : rows) nodes.push_back(r.node());
        Tape::active().push([nodes = std::move(nodes), on = out.node(), d] {
            for (std::size_t r = 0; r < nodes.size(); ++r) {
                if (!nodes[r]->requires_grad) continue;
                for (std::size_t c = 0; c < d; ++c) nodes[r]->grad[c] += on->grad[r * d + c];
            }
        });
    }
    return out;
}

Tensor select_row(const Tensor& t, std::size_t row) {
    if (t.rank() != 2) throw ShapeError("select_row: expected rank-2, got " + shape_to_string(t.shape()));
    if (row >= t.dim(0)) throw UsageError("select_row: row " + std::to_string(row) + " out of range");
    const std::size_t d = t.dim(1);
    const bool rec = grad_needed({&t});
    Tensor out = Tensor::zeros({d}, rec);
    for (std::size_t c = 0; c < d; ++c) out[c] = t[row * d + c];
    if (rec) {
        Tape::active().push([tn = t.node(), on = out.node(), row, d] {
            for (std::size_t c = 0; c < d; ++c) tn->grad[row * d + c] += on->grad[c];
        });
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw UsageError("concat_cols: empty input");
    const std::size_t rows = parts[0].dim(0);
    std::size_t total = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.dim(0) != rows) {
            throw ShapeError("concat_cols: parts must be rank-2 with equal row counts");
        }
        total += p.dim(1);
        any_grad |= p.requires_grad();
    }
    const bool rec = Tape::active().recording() && any_grad;
    Tensor out = Tensor::zeros({rows, total}, rec);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const std::size_t pc = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) out[r * total + off + c] = p[r * pc + c];
        off += pc;
    }
    if (rec) {
        std::vector<std::shared_ptr<detail::TensorNode>> nodes;
        std::vector<std::size_t> widths;
        for (const Tensor& p : parts) {
            nodes.push_back(p.node());
            widths.push_back(p.dim(1));
        }
        Tape::active().push([nodes = std::move(nodes), widths = std::move(widths),
                             on = out.node(), rows, total] {
            std::size_t off = 0;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const std::size_t pc = widths[i];
                if (nodes[i]->requires_grad) {
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < pc; ++c)
                            nodes[i]->grad[r * pc + c] += on->grad[r * total + off + c];
                }
                off += pc;
            }
        });
    }
    return out;
}

}  // namespace liptok
