#include "liptok/policy.hpp"

#include <cmath>

namespace liptok {

TransformerBlock TransformerBlock::init(const PolicyConfig& cfg, Rng& rng) {
    TransformerBlock b;
    const std::size_t d = cfg.model_dim;
    const std::size_t head_dim = d / cfg.heads;
    if (head_dim * cfg.heads != d) throw UsageError("model_dim must be divisible by heads");
    b.ln1_gain = Tensor::full({d}, 1, true);
    b.ln1_bias = Tensor::zeros({d}, true);
    b.ln2_gain = Tensor::full({d}, 1, true);
    b.ln2_bias = Tensor::zeros({d}, true);
    const Scalar bound = Scalar{1} / std::sqrt(static_cast<Scalar>(d));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        b.wq.push_back(Tensor::uniform({d, head_dim}, rng, -bound, bound, true));
        b.wk.push_back(Tensor::uniform({d, head_dim}, rng, -bound, bound, true));
        b.wv.push_back(Tensor::uniform({d, head_dim}, rng, -bound, bound, true));
    }
    b.wo = Tensor::uniform({d, d}, rng, -bound, bound, true);
    b.mlp_in = LinearLayer::init(d, cfg.mlp_hidden, rng);
    b.mlp_out = LinearLayer::init(cfg.mlp_hidden, d, rng);
    return b;
}

Tensor TransformerBlock::forward(const Tensor& x) const {
    const std::size_t head_dim = wq[0].dim(1);
    const Scalar inv_sqrt = Scalar{1} / std::sqrt(static_cast<Scalar>(head_dim));
    Tensor xn = layernorm(x, ln1_gain, ln1_bias);
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(wq.size());
    for (std::size_t h = 0; h < wq.size(); ++h) {
        Tensor q = matmul(xn, wq[h]);
        Tensor k = matmul(xn, wk[h]);
        Tensor v = matmul(xn, wv[h]);
        Tensor scores = scale(matmul_nt(q, k), inv_sqrt);
        Tensor attn = softmax_causal(scores);
        head_outputs.push_back(matmul(attn, v));
    }
    Tensor attn_out = matmul(concat_cols(head_outputs), wo);
    Tensor h = add(x, attn_out);
    Tensor hn = layernorm(h, ln2_gain, ln2_bias);
    Tensor mlp = mlp_out.forward(relu(mlp_in.forward(hn)));
    return add(h, mlp);
}

void TransformerBlock::collect_params(const std::string& prefix,
                                      std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".ln1.gain", ln1_gain});
    out.push_back({prefix + ".ln1.bias", ln1_bias});
    out.push_back({prefix + ".ln2.gain", ln2_gain});
    out.push_back({prefix + ".ln2.bias", ln2_bias});
    for (std::size_t h = 0; h < wq.size(); ++h) {
        const std::string hp = prefix + ".head" + std::to_string(h);
        out.push_back({hp + ".wq", wq[h]});
        out.push_back({hp + ".wk", wk[h]});
        out.push_back({hp + ".wv", wv[h]});
    }
    out.push_back({prefix + ".wo", wo});
    out.push_back({prefix + ".mlp_in.weight", mlp_in.weight});
    out.push_back({prefix + ".mlp_in.bias", mlp_in.bias});
    out.push_back({prefix + ".mlp_out.weight", mlp_out.weight});
    out.push_back({prefix + ".mlp_out.bias", mlp_out.bias});
}

CausalPolicy::CausalPolicy(PolicyConfig config, TokenizerConfig tokenizer_config, Rng& rng)
    : config_(config),
      tokenizer_([&] {
          Rng trng = rng.child("tokenizer");
          return ActionTokenizer(std::move(tokenizer_config), trng);
      }()) {
    Rng orng = rng.child("obs_encoder");
    obs_encoder_ = MLPStack::init({config_.obs_dim + config_.task_emb_dim, 64, config_.model_dim},
                                  false, orng);
    Rng prng = rng.child("act_proj");
    act_proj_ = LinearLayer::init(tokenizer_.config().latent_dim, config_.model_dim, prng);
    Rng erng = rng.child("embeddings");
    task_embedding_ = Tensor::uniform({config_.task_count, config_.task_emb_dim}, erng, -0.5, 0.5, true);
    const Scalar pb = Scalar{0.02};
    pos_embedding_ = Tensor::uniform({config_.max_seq_len, config_.model_dim}, erng, -pb, pb, true);
    type_embedding_ = Tensor::uniform({2, config_.model_dim}, erng, -pb, pb, true);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        Rng brng = rng.child("block", l);
        blocks_.push_back(TransformerBlock::init(config_, brng));
    }
    final_gain_ = Tensor::full({config_.model_dim}, 1, true);
    final_bias_ = Tensor::zeros({config_.model_dim}, true);
    Rng hrng = rng.child("action_head");
    action_head_ = MLPStack::init({config_.model_dim, 64, config_.act_dim}, false, hrng);
    Rng lrng = rng.child("latent_head");
    latent_head_ = LinearLayer::init(config_.model_dim, tokenizer_.config().latent_dim, lrng);
}

CausalPolicy::ForwardResult CausalPolicy::forward(const EpisodeSequence& seq,
                                                  std::size_t task_index) {
    return forward(seq.prompt, seq.query.obs, seq.query.length(), task_index);
}

CausalPolicy::ForwardResult CausalPolicy::forward(const Episode& prompt,
                                                  std::span<const Scalar> query_obs,
                                                  std::size_t query_len, std::size_t task_index) {
    if (prompt.length() == 0 || query_len == 0) {
        throw UsageError("policy forward: empty prompt or query");
    }
    if (task_index >= config_.task_count) throw UsageError("policy forward: bad task index");
    const std::size_t m = prompt.length(), n = query_len;
    const std::size_t seq_len = 2 * m + n;
    if (seq_len > config_.max_seq_len) {
        throw UsageError("sequence length " + std::to_string(seq_len) + " exceeds max_seq_len");
    }
    const std::size_t od = config_.obs_dim, dmodel = config_.model_dim;

    // All observation tokens share the prompt's task embedding: the query's
    // own task identity is withheld (the context must carry it).
    Tensor task_row = select_row(task_embedding_, task_index);
    std::vector<Tensor> task_rows(m + n, task_row);
    Tensor task_mat = stack_rows(task_rows);

    std::vector<Scalar> obs_data;
    obs_data.reserve((m + n) * od);
    obs_data.insert(obs_data.end(), prompt.obs.begin(), prompt.obs.end());
    obs_data.insert(obs_data.end(), query_obs.begin(), query_obs.end());
    Tensor obs_mat = Tensor::from({m + n, od}, std::move(obs_data));
    std::vector<Tensor> obs_parts = {obs_mat, task_mat};
    Tensor obs_feats = obs_encoder_.forward(concat_cols(obs_parts));  // [m+n, dmodel]

    ForwardResult result;
    Tensor prompt_actions = Tensor::from({m, prompt.act_dim}, prompt.act);
    result.prompt_actions_out = tokenizer_.tokenize(prompt_actions);
    Tensor act_feats = act_proj_.forward(result.prompt_actions_out.token);  // [m, dmodel]

    // Interleave rows: (o_p, a_p) * m then o_q * n, plus positional and
    // token-type embeddings.
    std::vector<Tensor> rows;
    rows.reserve(seq_len);
    std::vector<Tensor> pos_rows, type_rows;
    pos_rows.reserve(seq_len);
    type_rows.reserve(seq_len);
    Tensor type_obs = select_row(type_embedding_, 0);
    Tensor type_act = select_row(type_embedding_, 1);
    for (std::size_t t = 0; t < m; ++t) {
        rows.push_back(select_row(obs_feats, t));
        type_rows.push_back(type_obs);
        rows.push_back(select_row(act_feats, t));
        type_rows.push_back(type_act);
    }
    for (std::size_t t = 0; t < n; ++t) {
        rows.push_back(select_row(obs_feats, m + t));
        type_rows.push_back(type_obs);
    }
    for (std::size_t i = 0; i < seq_len; ++i) pos_rows.push_back(select_row(pos_embedding_, i));

    Tensor x = add(add(stack_rows(rows), stack_rows(pos_rows)), stack_rows(type_rows));
    for (const TransformerBlock& block : blocks_) x = block.forward(x);
    x = layernorm(x, final_gain_, final_bias_);

    std::vector<Tensor> slot_rows;
    slot_rows.reserve(n);
    for (std::size_t t = 0; t < n; ++t) slot_rows.push_back(select_row(x, 2 * m + t));
    Tensor slots = stack_rows(slot_rows);
    result.pred_actions = action_head_.forward(slots);
    // The latent head trains on a detached trunk so it cannot perturb the
    // policy's representation.
    result.pred_latents = latent_head_.forward(stop_gradient(slots));
    return result;
}

std::vector<Scalar> CausalPolicy::predict_action(const Episode& prompt,
                                                 const std::vector<Scalar>& query_obs_flat,
                                                 std::size_t query_len, std::size_t task_index) {
    NoGradGuard ng;
    ForwardResult res = forward(prompt, query_obs_flat, query_len, task_index);
    const std::size_t a = config_.act_dim;
    std::vector<Scalar> action(a);
    if (config_.decode_via_tokenizer &&
        tokenizer_.config().kind != TokenizerKind::Bin) {
        const std::size_t d = tokenizer_.config().latent_dim;
        Tensor latent = Tensor::from(
            {1, d}, {res.pred_latents.values().end() - static_cast<std::ptrdiff_t>(d),
                     res.pred_latents.values().end()});
        Tensor decoded = tokenizer_.decode_latent(latent);
        for (std::size_t c = 0; c < a; ++c) action[c] = decoded[c];
    } else {
        // The action head predicts in normalized action space.
        std::vector<Scalar> normalized(a);
        for (std::size_t c = 0; c < a; ++c) {
            normalized[c] = res.pred_actions[(query_len - 1) * a + c];
        }
        action = tokenizer_.denormalize_action(normalized);
    }
    return action;
}

std::vector<NamedParam> CausalPolicy::params() {
    std::vector<NamedParam> out;
    for (auto& p : tokenizer_.params()) out.push_back(p);
    for (auto& p : obs_encoder_.params("obs_encoder")) out.push_back(p);
    out.push_back({"act_proj.weight", act_proj_.weight});
    out.push_back({"act_proj.bias", act_proj_.bias});
    out.push_back({"task_embedding", task_embedding_});
    out.push_back({"pos_embedding", pos_embedding_});
    out.push_back({"type_embedding", type_embedding_});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        blocks_[l].collect_params("block" + std::to_string(l), out);
    }
    out.push_back({"final_ln.gain", final_gain_});
    out.push_back({"final_ln.bias", final_bias_});
    for (auto& p : action_head_.params("action_head")) out.push_back(p);
    out.push_back({"latent_head.weight", latent_head_.weight});
    out.push_back({"latent_head.bias", latent_head_.bias});
    return out;
}

}  // namespace liptok
