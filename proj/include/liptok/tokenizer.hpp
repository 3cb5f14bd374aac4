#pragma once

#include <optional>
#include <string>

#include "liptok/dataset.hpp"
#include "liptok/layers.hpp"
#include "liptok/quantize.hpp"

namespace liptok {

enum class TokenizerKind { Mlp, Bin, VqVae, LfqVae, LipVqVae };

std::string to_string(TokenizerKind kind);
TokenizerKind tokenizer_kind_from_string(const std::string& name);

struct TokenizerConfig {
    TokenizerKind kind = TokenizerKind::LipVqVae;
    std::size_t action_dim = 7;
    std::size_t latent_dim = 8;
    std::size_t codebook_size = 1024;
    std::vector<std::size_t> encoder_hidden = {256, 256};
    Scalar alpha = Scalar{1.0};
    Scalar beta = Scalar{0.25};
    Scalar gamma = Scalar{1e-6};
    // Lipschitz-constrained encoder. Defaults to true for lipvqvae only; the
    // ablation toggles it on other continuous-latent kinds.
    bool lipschitz = false;
    int bins_per_dim = 256;

    static TokenizerConfig for_kind(TokenizerKind kind);
    void validate() const;
    // Sorted key=value lines; the canonical form embedded in checkpoints.
    std::string canonical_text() const;
    static TokenizerConfig from_text(const std::string& text);
};

struct TokenizerOutput {
    Tensor token;           // h^a, [B, latent_dim]
    std::vector<std::size_t> indices;  // discrete codes where applicable
    Tensor reconstruction;  // x̂, [B, action_dim], original units
    // Scalar loss components; absent ones are constant zero.
    Tensor loss_reconstruction;
    Tensor loss_codebook;
    Tensor loss_commitment;
    Tensor loss_lipschitz;
};

// An assembled action tokenizer: encode an action batch to latent tokens and
// reconstructions, expose the training loss terms, decode latents back to
// actions. Construction is kind-driven; all kinds share this interface.
class ActionTokenizer {
  public:
    ActionTokenizer(TokenizerConfig config, Rng& rng);

    const TokenizerConfig& config() const { return config_; }

    // Per-dimension affine map onto [-1,1] fitted from the 1st/99th
    // percentiles of the dataset actions; stored in checkpoints.
    void fit_normalization(const Tensor& actions);
    Tensor normalization_scale() const { return norm_scale_; }
    Tensor normalization_offset() const { return norm_offset_; }
    void set_normalization(const Tensor& scale, const Tensor& offset);

    // Applies the fitted affine map (plain data, no tape).
    Tensor normalize_actions(const Tensor& actions) const;
    std::vector<Scalar> denormalize_action(std::span<const Scalar> normalized) const;

    // actions: [B, A] (or rank-1 [A] treated as B=1). Differentiable; the
    // loss components connect to the tape.
    TokenizerOutput tokenize(const Tensor& actions);

    // Weighted Eq-5 style composition of the output's loss components.
    Tensor total_loss(const TokenizerOutput& out) const;

    // token [B, D] -> action [B, A] in original units. VQ kinds snap to the
    // nearest codebook entry first, LFQ re-signs; unsupported for bin.
    Tensor decode_latent(const Tensor& token);

    std::vector<NamedParam> params();
    MLPStack& encoder() { return encoder_; }
    const MLPStack& encoder() const { return encoder_; }
    Codebook& codebook() { return codebook_; }
    bool has_codebook() const;
    bool has_encoder() const;
    // Product Lipschitz bound of the encoder; only for constrained configs.
    Scalar encoder_lipschitz_bound() const { return encoder_.network_lipschitz_bound(); }

    std::int64_t trained_steps = 0;

  private:
    Tensor normalize(const Tensor& actions) const;
    Tensor denormalize_op(const Tensor& normalized) const;

    TokenizerConfig config_;
    MLPStack encoder_;
    MLPStack decoder_;
    Codebook codebook_;
    Tensor bin_embedding_;  // [A * bins, D]
    BinSpec bin_spec_;
    Tensor norm_scale_;   // [A]
    Tensor norm_offset_;  // [A]
};

// Mean squared reconstruction error per scalar element over a [N, A] action
// set, computed in normalized space with the tape disabled.
Scalar reconstruction_error(ActionTokenizer& tokenizer, const Tensor& actions);

struct TokenizerTrainConfig {
    int steps = 20000;
    int batch = 16;
    Scalar lr = Scalar{1e-3};
    int warmup_steps = 100;
    std::uint64_t seed = 0;
    int eval_every = 0;  // 0: only start/end
};

struct TokenizerTrainResult {
    std::vector<std::pair<int, double>> loss_curve;  // (step, batch loss)
    double initial_recon_mse = 0;
    double final_recon_mse = 0;
};

// Standalone reconstruction training on a pooled action set. Fits the
// normalization if it has not been set yet.
TokenizerTrainResult train_tokenizer(ActionTokenizer& tokenizer, const Tensor& actions,
                                     const TokenizerTrainConfig& config);

}  // namespace liptok
