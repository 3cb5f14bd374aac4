#include "liptok/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "liptok/textio.hpp"

namespace liptok {

std::string to_string(TokenizerKind kind) {
    switch (kind) {
        case TokenizerKind::Mlp: return "mlp";
        case TokenizerKind::Bin: return "bin";
        case TokenizerKind::VqVae: return "vqvae";
        case TokenizerKind::LfqVae: return "lfqvae";
        case TokenizerKind::LipVqVae: return "lipvqvae";
    }
    throw UsageError("unknown tokenizer kind");
}

TokenizerKind tokenizer_kind_from_string(const std::string& name) {
    if (name == "mlp") return TokenizerKind::Mlp;
    if (name == "bin") return TokenizerKind::Bin;
    if (name == "vqvae") return TokenizerKind::VqVae;
    if (name == "lfqvae") return TokenizerKind::LfqVae;
    if (name == "lipvqvae") return TokenizerKind::LipVqVae;
    throw UsageError("unknown tokenizer kind: '" + name + "'");
}

TokenizerConfig TokenizerConfig::for_kind(TokenizerKind kind) {
    TokenizerConfig cfg;
    cfg.kind = kind;
    cfg.lipschitz = (kind == TokenizerKind::LipVqVae);
    return cfg;
}

void TokenizerConfig::validate() const {
    if (kind == TokenizerKind::LipVqVae && !lipschitz) {
        throw UsageError("lipvqvae requires lipschitz=true");
    }
    if ((kind == TokenizerKind::Bin || kind == TokenizerKind::LfqVae) && lipschitz) {
        throw UsageError("lipschitz regularization requires a continuous latent encoder");
    }
    if (action_dim == 0 || latent_dim == 0) throw UsageError("zero tokenizer dims");
    if (codebook_size < 2) throw UsageError("codebook_size must be >= 2");
    if (bins_per_dim < 2) throw UsageError("bins_per_dim must be >= 2");
    if (kind == TokenizerKind::LfqVae && latent_dim > 30) {
        throw UsageError("lfqvae latent_dim must be <= 30");
    }
}

std::string TokenizerConfig::canonical_text() const {
    std::ostringstream hidden;
    for (std::size_t i = 0; i < encoder_hidden.size(); ++i) {
        if (i) hidden << ',';
        hidden << encoder_hidden[i];
    }
    // Keys emitted in sorted order.
    std::string out;
    out += "action_dim=" + std::to_string(action_dim) + "\n";
    out += "alpha=" + fmt_double(alpha) + "\n";
    out += "beta=" + fmt_double(beta) + "\n";
    out += "bins_per_dim=" + std::to_string(bins_per_dim) + "\n";
    out += "codebook_size=" + std::to_string(codebook_size) + "\n";
    out += "encoder_hidden=" + hidden.str() + "\n";
    out += "gamma=" + fmt_double(gamma) + "\n";
    out += "kind=" + to_string(kind) + "\n";
    out += "latent_dim=" + std::to_string(latent_dim) + "\n";
    out += "lipschitz=" + std::string(lipschitz ? "true" : "false") + "\n";
    return out;
}

TokenizerConfig TokenizerConfig::from_text(const std::string& text) {
    TokenizerConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("malformed config line: '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "action_dim") cfg.action_dim = static_cast<std::size_t>(parse_int(value));
        else if (key == "alpha") cfg.alpha = static_cast<Scalar>(parse_double(value));
        else if (key == "beta") cfg.beta = static_cast<Scalar>(parse_double(value));
        else if (key == "bins_per_dim") cfg.bins_per_dim = static_cast<int>(parse_int(value));
        else if (key == "codebook_size") cfg.codebook_size = static_cast<std::size_t>(parse_int(value));
        else if (key == "encoder_hidden") {
            cfg.encoder_hidden.clear();
            std::istringstream hs(value);
            std::string tok;
            while (std::getline(hs, tok, ',')) {
                if (!tok.empty()) cfg.encoder_hidden.push_back(static_cast<std::size_t>(parse_int(tok)));
            }
        } else if (key == "gamma") cfg.gamma = static_cast<Scalar>(parse_double(value));
        else if (key == "kind") cfg.kind = tokenizer_kind_from_string(value);
        else if (key == "latent_dim") cfg.latent_dim = static_cast<std::size_t>(parse_int(value));
        else if (key == "lipschitz") cfg.lipschitz = (value == "true");
        else throw IoError("unknown tokenizer config key: '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

namespace {

bool kind_uses_encoder(TokenizerKind kind) { return kind != TokenizerKind::Bin; }

Tensor zero_scalar() { return Tensor::scalar(0); }

}  // namespace

ActionTokenizer::ActionTokenizer(TokenizerConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    const std::size_t a = config_.action_dim;
    const std::size_t d = config_.latent_dim;
    if (kind_uses_encoder(config_.kind)) {
        std::vector<std::size_t> enc_dims = {a};
        enc_dims.insert(enc_dims.end(), config_.encoder_hidden.begin(), config_.encoder_hidden.end());
        enc_dims.push_back(d);
        Rng enc_rng = rng.child("encoder");
        encoder_ = MLPStack::init(enc_dims, config_.lipschitz, enc_rng);
        // The decoder stays unconstrained: only the encoder carries the
        // Lipschitz condition.
        std::vector<std::size_t> dec_dims = {d};
        dec_dims.insert(dec_dims.end(), config_.encoder_hidden.begin(), config_.encoder_hidden.end());
        dec_dims.push_back(a);
        Rng dec_rng = rng.child("decoder");
        decoder_ = MLPStack::init(dec_dims, false, dec_rng);
    }
    if (config_.kind == TokenizerKind::VqVae || config_.kind == TokenizerKind::LipVqVae) {
        Rng cb_rng = rng.child("codebook");
        codebook_ = Codebook::init(config_.codebook_size, d, cb_rng);
    }
    if (config_.kind == TokenizerKind::Bin) {
        Rng bin_rng = rng.child("bin_embedding");
        const Scalar bound = Scalar{1} / std::sqrt(static_cast<Scalar>(d));
        bin_embedding_ = Tensor::uniform({a * static_cast<std::size_t>(config_.bins_per_dim), d},
                                         bin_rng, -bound, bound, true);
    }
    bin_spec_ = BinSpec::uniform(a, config_.bins_per_dim, -1, 1);
    norm_scale_ = Tensor::full({a}, 1);
    norm_offset_ = Tensor::zeros({a});
}

bool ActionTokenizer::has_codebook() const {
    return config_.kind == TokenizerKind::VqVae || config_.kind == TokenizerKind::LipVqVae;
}

bool ActionTokenizer::has_encoder() const { return kind_uses_encoder(config_.kind); }

void ActionTokenizer::fit_normalization(const Tensor& actions) {
    if (actions.rank() != 2 || actions.dim(1) != config_.action_dim) {
        throw ShapeError("fit_normalization: expected [N, " + std::to_string(config_.action_dim) +
                         "], got " + shape_to_string(actions.shape()));
    }
    const std::size_t n = actions.dim(0), a = config_.action_dim;
    if (n == 0) throw UsageError("fit_normalization on empty action set");
    std::vector<Scalar> column(n);
    for (std::size_t c = 0; c < a; ++c) {
        for (std::size_t r = 0; r < n; ++r) column[r] = actions[r * a + c];
        std::sort(column.begin(), column.end());
        const auto pct = [&](double q) {
            const double pos = q * static_cast<double>(n - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, n - 1);
            const double frac = pos - static_cast<double>(lo);
            return column[lo] * (1.0 - frac) + column[hi] * frac;
        };
        const Scalar lo = static_cast<Scalar>(pct(0.01));
        const Scalar hi = static_cast<Scalar>(pct(0.99));
        const Scalar mid = (lo + hi) / 2;
        const Scalar half = std::max((hi - lo) / 2, Scalar{1e-8});
        norm_offset_[c] = mid;
        norm_scale_[c] = Scalar{1} / half;
    }
}

void ActionTokenizer::set_normalization(const Tensor& scale, const Tensor& offset) {
    if (scale.shape() != Shape{config_.action_dim} || offset.shape() != Shape{config_.action_dim}) {
        throw ShapeError("set_normalization: wrong shape");
    }
    norm_scale_ = scale.clone();
    norm_offset_ = offset.clone();
}

Tensor ActionTokenizer::normalize(const Tensor& actions) const {
    const std::size_t b = actions.dim(0), a = actions.dim(1);
    Tensor out = Tensor::zeros({b, a});
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < a; ++c)
            out[r * a + c] = (actions[r * a + c] - norm_offset_[c]) * norm_scale_[c];
    return out;
}

Tensor ActionTokenizer::normalize_actions(const Tensor& actions) const {
    if (actions.rank() != 2 || actions.dim(1) != config_.action_dim) {
        throw ShapeError("normalize_actions: expected [B, " + std::to_string(config_.action_dim) +
                         "], got " + shape_to_string(actions.shape()));
    }
    return normalize(actions);
}

std::vector<Scalar> ActionTokenizer::denormalize_action(std::span<const Scalar> normalized) const {
    if (normalized.size() != config_.action_dim) {
        throw ShapeError("denormalize_action: wrong action dim");
    }
    std::vector<Scalar> out(normalized.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = normalized[c] / norm_scale_[c] + norm_offset_[c];
    }
    return out;
}

Tensor ActionTokenizer::denormalize_op(const Tensor& normalized) const {
    const std::size_t b = normalized.dim(0), a = normalized.dim(1);
    // x̂ = normalized ⊙ (1/scale) + offset, built from tape ops so gradients
    // pass through when the caller differentiates reconstructions.
    std::vector<Scalar> inv(b * a);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t c = 0; c < a; ++c) inv[r * a + c] = Scalar{1} / norm_scale_[c];
    return add_rowwise(mul(normalized, Tensor::from({b, a}, std::move(inv))), norm_offset_);
}

TokenizerOutput ActionTokenizer::tokenize(const Tensor& actions_in) {
    Tensor actions = actions_in;
    if (actions.rank() == 1) {
        actions = Tensor::from({1, actions_in.numel()},
                               {actions_in.values().begin(), actions_in.values().end()});
    }
    if (actions.rank() != 2 || actions.dim(1) != config_.action_dim) {
        throw ShapeError("tokenize: expected [B, " + std::to_string(config_.action_dim) +
                         "], got " + shape_to_string(actions_in.shape()));
    }
    for (Scalar v : actions.values()) {
        if (!std::isfinite(v)) throw UsageError("tokenize: non-finite action input");
    }
    const std::size_t b = actions.dim(0);
    const std::size_t a = config_.action_dim;
    const std::size_t d = config_.latent_dim;
    const Tensor x = normalize(actions);

    TokenizerOutput out;
    out.loss_reconstruction = zero_scalar();
    out.loss_codebook = zero_scalar();
    out.loss_commitment = zero_scalar();
    out.loss_lipschitz = zero_scalar();

    switch (config_.kind) {
        case TokenizerKind::Mlp: {
            out.token = encoder_.forward(x);
            const Tensor recon = decoder_.forward(out.token);
            out.loss_reconstruction = mse_rows(recon, x);
            out.reconstruction = denormalize_op(recon);
            if (config_.lipschitz) out.loss_lipschitz = encoder_.lipschitz_loss();
            break;
        }
        case TokenizerKind::Bin: {
            std::vector<Scalar> centers(b * a);
            std::vector<Tensor> token_rows;
            token_rows.reserve(b);
            out.indices.reserve(b * a);
            for (std::size_t r = 0; r < b; ++r) {
                const auto idx = bin_encode({x.values().data() + r * a, a}, bin_spec_);
                const auto dec = bin_decode(idx, bin_spec_);
                for (std::size_t c = 0; c < a; ++c) {
                    centers[r * a + c] = dec[c];
                    out.indices.push_back(static_cast<std::size_t>(idx[c]));
                }
                // Token: mean of the per-dimension bin embeddings.
                Tensor acc = select_row(bin_embedding_,
                                        0 * static_cast<std::size_t>(config_.bins_per_dim) +
                                            static_cast<std::size_t>(idx[0]));
                for (std::size_t c = 1; c < a; ++c) {
                    acc = add(acc, select_row(bin_embedding_,
                                              c * static_cast<std::size_t>(config_.bins_per_dim) +
                                                  static_cast<std::size_t>(idx[c])));
                }
                token_rows.push_back(scale(acc, Scalar{1} / static_cast<Scalar>(a)));
            }
            out.token = stack_rows(token_rows);
            const Tensor recon = Tensor::from({b, a}, std::move(centers));
            out.loss_reconstruction = mse_rows(recon, x);
            out.reconstruction = denormalize_op(recon);
            break;
        }
        case TokenizerKind::VqVae:
        case TokenizerKind::LipVqVae: {
            const Tensor latents = encoder_.forward(x);
            QuantizationResult qr = vq_lookup(codebook_, latents);
            out.token = qr.quantized;
            out.indices = std::move(qr.indices);
            const Tensor recon = decoder_.forward(out.token);
            out.loss_reconstruction = mse_rows(recon, x);
            out.loss_codebook = qr.codebook_loss;
            out.loss_commitment = qr.commitment_loss;
            out.reconstruction = denormalize_op(recon);
            if (config_.lipschitz) out.loss_lipschitz = encoder_.lipschitz_loss();
            break;
        }
        case TokenizerKind::LfqVae: {
            const Tensor latents = encoder_.forward(x);
            QuantizationResult qr = lfq_quantize(latents);
            out.token = qr.quantized;
            out.indices = std::move(qr.indices);
            const Tensor recon = decoder_.forward(out.token);
            out.loss_reconstruction = mse_rows(recon, x);
            out.loss_commitment = qr.commitment_loss;
            out.reconstruction = denormalize_op(recon);
            break;
        }
    }
    (void)d;
    return out;
}

Tensor ActionTokenizer::total_loss(const TokenizerOutput& out) const {
    Tensor loss = out.loss_reconstruction;
    loss = add(loss, scale(out.loss_codebook, config_.alpha));
    loss = add(loss, scale(out.loss_commitment, config_.beta));
    loss = add(loss, scale(out.loss_lipschitz, config_.gamma));
    return loss;
}

Tensor ActionTokenizer::decode_latent(const Tensor& token_in) {
    Tensor token = token_in;
    if (token.rank() == 1) {
        token = Tensor::from({1, token_in.numel()},
                             {token_in.values().begin(), token_in.values().end()});
    }
    if (token.rank() != 2 || token.dim(1) != config_.latent_dim) {
        throw ShapeError("decode_latent: expected [B, " + std::to_string(config_.latent_dim) +
                         "], got " + shape_to_string(token_in.shape()));
    }
    switch (config_.kind) {
        case TokenizerKind::Bin:
            throw UsageError("decode_latent is not defined for the bin tokenizer");
        case TokenizerKind::Mlp:
            return denormalize_op(decoder_.forward(token));
        case TokenizerKind::LfqVae: {
            QuantizationResult qr = lfq_quantize(token);
            return denormalize_op(decoder_.forward(qr.quantized));
        }
        case TokenizerKind::VqVae:
        case TokenizerKind::LipVqVae: {
            // Snap to the nearest codebook entry, then decode.
            const std::size_t b = token.dim(0), d = config_.latent_dim, k = codebook_.size();
            Tensor snapped = Tensor::zeros({b, d});
            for (std::size_t r = 0; r < b; ++r) {
                const Scalar* x = token.values().data() + r * d;
                Scalar best = std::numeric_limits<Scalar>::infinity();
                std::size_t best_j = 0;
                for (std::size_t j = 0; j < k; ++j) {
                    const Scalar* e = codebook_.entries.values().data() + j * d;
                    Scalar dist{0};
                    for (std::size_t c = 0; c < d; ++c) dist += (x[c] - e[c]) * (x[c] - e[c]);
                    if (dist < best) {
                        best = dist;
                        best_j = j;
                    }
                }
                for (std::size_t c = 0; c < d; ++c) snapped[r * d + c] = codebook_.entries[best_j * d + c];
            }
            return denormalize_op(decoder_.forward(snapped));
        }
    }
    throw UsageError("unreachable tokenizer kind");
}

std::vector<NamedParam> ActionTokenizer::params() {
    std::vector<NamedParam> out;
    if (has_encoder()) {
        auto enc = encoder_.params("encoder");
        auto dec = decoder_.params("decoder");
        out.insert(out.end(), enc.begin(), enc.end());
        out.insert(out.end(), dec.begin(), dec.end());
    }
    if (has_codebook()) out.push_back({"codebook.entries", codebook_.entries});
    if (config_.kind == TokenizerKind::Bin) out.push_back({"bin.embedding", bin_embedding_});
    return out;
}

Scalar reconstruction_error(ActionTokenizer& tokenizer, const Tensor& actions) {
    if (actions.rank() != 2 || actions.dim(0) == 0) {
        throw UsageError("reconstruction_error: empty or malformed action set");
    }
    NoGradGuard ng;
    const std::size_t n = actions.dim(0), a = actions.dim(1);
    const Tensor scale_t = tokenizer.normalization_scale();
    double total = 0;
    const std::size_t chunk = 512;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t stop = std::min(n, start + chunk);
        Tensor batch = Tensor::from(
            {stop - start, a},
            {actions.values().begin() + static_cast<std::ptrdiff_t>(start * a),
             actions.values().begin() + static_cast<std::ptrdiff_t>(stop * a)});
        TokenizerOutput out = tokenizer.tokenize(batch);
        // Compare in normalized space.
        for (std::size_t r = 0; r < stop - start; ++r) {
            for (std::size_t c = 0; c < a; ++c) {
                const double x = (batch[r * a + c] - tokenizer.normalization_offset()[c]) * scale_t[c];
                const double xh = (out.reconstruction[r * a + c] - tokenizer.normalization_offset()[c]) * scale_t[c];
                total += (x - xh) * (x - xh);
            }
        }
    }
    return static_cast<Scalar>(total / static_cast<double>(n * a));
}

TokenizerTrainResult train_tokenizer(ActionTokenizer& tokenizer, const Tensor& actions,
                                     const TokenizerTrainConfig& config) {
    if (actions.rank() != 2 || actions.dim(0) < 2) {
        throw UsageError("train_tokenizer: need a [N>=2, A] action set");
    }
    bool identity_norm = true;
    for (std::size_t c = 0; c < actions.dim(1); ++c) {
        identity_norm &= tokenizer.normalization_scale()[c] == Scalar{1} &&
                         tokenizer.normalization_offset()[c] == Scalar{0};
    }
    if (identity_norm) tokenizer.fit_normalization(actions);

    TokenizerTrainResult result;
    result.initial_recon_mse = reconstruction_error(tokenizer, actions);

    Adam opt(tokenizer.params(),
             {.lr = config.lr, .beta1 = 0.9, .beta2 = 0.95, .eps = 1e-8, .warmup_steps = config.warmup_steps});
    Rng rng(config.seed);
    Rng sample_rng = rng.child("batch");
    const std::size_t n = actions.dim(0), a = actions.dim(1);
    std::vector<Scalar> batch_data(static_cast<std::size_t>(config.batch) * a);
    for (int step = 0; step < config.steps; ++step) {
        for (int i = 0; i < config.batch; ++i) {
            const std::size_t r = sample_rng.uniform_index(n);
            for (std::size_t c = 0; c < a; ++c) batch_data[static_cast<std::size_t>(i) * a + c] = actions[r * a + c];
        }
        Tensor batch = Tensor::from({static_cast<std::size_t>(config.batch), a}, batch_data);
        opt.zero_grad();
        TokenizerOutput out = tokenizer.tokenize(batch);
        Tensor loss = tokenizer.total_loss(out);
        const double loss_value = loss.value();
        if (!std::isfinite(loss_value)) {
            throw TrainingError("tokenizer training diverged at step " + std::to_string(step));
        }
        Tape::active().backward(loss);
        opt.step();
        ++tokenizer.trained_steps;
        if (config.eval_every > 0 && step % config.eval_every == 0) {
            result.loss_curve.emplace_back(step, loss_value);
        } else if (config.eval_every == 0 && (step % 100 == 0 || step + 1 == config.steps)) {
            result.loss_curve.emplace_back(step, loss_value);
        }
    }
    result.final_recon_mse = reconstruction_error(tokenizer, actions);
    return result;
}

}  // namespace liptok
