#pragma once

#include "liptok/env.hpp"
#include "liptok/sequence.hpp"
#include "liptok/tokenizer.hpp"

namespace liptok {

struct PolicyConfig {
    std::size_t obs_dim = ToyEnv::kObsDim;
    std::size_t act_dim = ToyEnv::kActDim;
    std::size_t model_dim = 64;
    std::size_t heads = 4;
    std::size_t layers = 2;
    std::size_t mlp_hidden = 256;
    std::size_t task_count = 3;
    std::size_t task_emb_dim = 8;
    std::size_t max_seq_len = 512;
    // Rollouts decode the predicted latent through the tokenizer decoder
    // instead of reading the action head directly.
    bool decode_via_tokenizer = false;
};

struct TransformerBlock {
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    std::vector<Tensor> wq, wk, wv;  // per head, [model_dim, head_dim]
    Tensor wo;                       // [model_dim, model_dim]
    LinearLayer mlp_in, mlp_out;

    static TransformerBlock init(const PolicyConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Causal transformer over interleaved observation/action tokens. Observation
// tokens embed the raw state together with the prompt's task embedding; action
// tokens come from the pluggable action tokenizer and are projected into the
// shared latent space. The output at each query observation slot is decoded
// into an action by a dedicated head (or routed through the tokenizer decoder).
class CausalPolicy {
  public:
    CausalPolicy(PolicyConfig config, TokenizerConfig tokenizer_config, Rng& rng);

    const PolicyConfig& config() const { return config_; }
    ActionTokenizer& tokenizer() { return tokenizer_; }

    struct ForwardResult {
        Tensor pred_actions;  // [N, act_dim] at query observation slots
        Tensor pred_latents;  // [N, latent_dim], trained against sg[h^a]
        TokenizerOutput prompt_actions_out;  // tokenizer pass over prompt actions
    };

    // Full teacher-forced pass over prompt + query observations. The query
    // observations are supplied flat (N x obs_dim); task_index conditions
    // every observation token (the prompt's task at evaluation time).
    ForwardResult forward(const Episode& prompt, std::span<const Scalar> query_obs,
                          std::size_t query_len, std::size_t task_index);

    ForwardResult forward(const EpisodeSequence& seq, std::size_t task_index);

    // Closed-loop prediction for the latest observation in the growing query.
    std::vector<Scalar> predict_action(const Episode& prompt,
                                       const std::vector<Scalar>& query_obs_flat,
                                       std::size_t query_len, std::size_t task_index);

    std::vector<NamedParam> params();

  private:
    PolicyConfig config_;
    ActionTokenizer tokenizer_;
    MLPStack obs_encoder_;     // (obs_dim + task_emb_dim) -> ... -> model_dim
    LinearLayer act_proj_;     // latent_dim -> model_dim
    Tensor task_embedding_;    // [task_count, task_emb_dim]
    Tensor pos_embedding_;     // [max_seq_len, model_dim]
    Tensor type_embedding_;    // [2, model_dim] (observation / action)
    std::vector<TransformerBlock> blocks_;
    Tensor final_gain_, final_bias_;
    MLPStack action_head_;     // model_dim -> ... -> act_dim
    LinearLayer latent_head_;  // model_dim -> latent_dim (input detached)
};

}  // namespace liptok
