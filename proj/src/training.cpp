#include "liptok/training.hpp"

#include <cmath>

#include "liptok/parallel.hpp"
#include "liptok/smoothness.hpp"
#include "liptok/textio.hpp"

namespace liptok {

std::size_t task_index_of(const std::string& task_id) {
    return static_cast<std::size_t>(task_from_string(task_id));
}

namespace {

struct FamilyIndex {
    std::vector<std::string> families;              // sorted unique task ids
    std::map<std::string, std::vector<std::size_t>> members;
    std::map<std::string, std::vector<std::size_t>> successful;
};

FamilyIndex index_families(const std::vector<Episode>& dataset) {
    FamilyIndex idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        idx.members[dataset[i].task_id].push_back(i);
        if (dataset[i].success) idx.successful[dataset[i].task_id].push_back(i);
    }
    for (const auto& [family, members] : idx.members) {
        if (members.size() < 2) {
            throw UsageError("train_policy: task family '" + family +
                             "' needs at least 2 episodes (one prompt + one query)");
        }
        if (idx.successful[family].empty()) {
            throw UsageError("train_policy: task family '" + family +
                             "' has no successful episode to use as a prompt");
        }
        idx.families.push_back(family);
    }
    return idx;
}

}  // namespace

PolicyTrainResult train_policy(CausalPolicy& policy, const std::vector<Episode>& dataset,
                               const PolicyTrainConfig& config) {
    if (dataset.empty()) throw UsageError("train_policy: empty dataset");
    const FamilyIndex idx = index_families(dataset);

    // Fit the action normalization once over the whole dataset.
    policy.tokenizer().fit_normalization(dataset_actions(dataset));

    Adam opt(policy.params(), {.lr = config.lr,
                               .beta1 = 0.9,
                               .beta2 = 0.95,
                               .eps = 1e-8,
                               .warmup_steps = config.warmup_steps});
    Rng rng(config.seed);
    Rng sample_rng = rng.child("batch");

    PolicyTrainResult result;
    ActionTokenizer& tokenizer = policy.tokenizer();
    const Scalar alpha = tokenizer.config().alpha;
    const Scalar beta = tokenizer.config().beta;
    const Scalar gamma = tokenizer.config().gamma;

    for (int step = 0; step < config.steps; ++step) {
        opt.zero_grad();
        Tensor loss = Tensor::scalar(0);
        for (int b = 0; b < config.batch; ++b) {
            const std::string& family =
                idx.families[sample_rng.uniform_index(idx.families.size())];
            const auto& prompts = idx.successful.at(family);
            const auto& members = idx.members.at(family);
            // Prompt and query are never the same episode.
            std::size_t prompt_idx = prompts[sample_rng.uniform_index(prompts.size())];
            std::size_t query_idx = members[sample_rng.uniform_index(members.size())];
            for (int guard = 0; query_idx == prompt_idx && guard < 64; ++guard) {
                query_idx = members[sample_rng.uniform_index(members.size())];
            }
            if (query_idx == prompt_idx) continue;

            const Episode& prompt = dataset[prompt_idx];
            const Episode& query = dataset[query_idx];
            auto fwd = policy.forward(prompt, query.obs, query.length(), task_index_of(family));

            // Behavior cloning in normalized action space, so every action
            // dimension carries comparable gradient weight.
            Tensor targets = Tensor::from({query.length(), query.act_dim}, query.act);
            Tensor bc = mse_rows(fwd.pred_actions, tokenizer.normalize_actions(targets));

            // Tokenizer objective over all actions in the batch element
            // (prompt actions came through the sequence forward; query actions
            // are tokenized for the loss only). The Lipschitz term depends
            // only on the bound parameters, so it enters once.
            TokenizerOutput query_out = tokenizer.tokenize(targets);
            Tensor tok_loss = add(fwd.prompt_actions_out.loss_reconstruction,
                                  query_out.loss_reconstruction);
            tok_loss = add(tok_loss, scale(add(fwd.prompt_actions_out.loss_codebook,
                                               query_out.loss_codebook),
                                           alpha));
            tok_loss = add(tok_loss, scale(add(fwd.prompt_actions_out.loss_commitment,
                                               query_out.loss_commitment),
                                           beta));
            tok_loss = add(tok_loss, scale(fwd.prompt_actions_out.loss_lipschitz, gamma));

            // Auxiliary latent-head regression toward the query action tokens
            // (trunk detached inside the policy).
            Tensor latent_aux = mse_rows(fwd.pred_latents, stop_gradient(query_out.token));

            loss = add(loss, add(bc, add(tok_loss, latent_aux)));
        }
        loss = scale(loss, Scalar{1} / static_cast<Scalar>(config.batch));
        const double loss_value = loss.value();
        if (!std::isfinite(loss_value)) {
            throw TrainingError("policy training diverged at step " + std::to_string(step) +
                                " (loss=" + fmt_double(loss_value) + ")");
        }
        Tape::active().backward(loss);
        opt.step();
        ++tokenizer.trained_steps;
        if (step % config.log_every == 0 || step + 1 == config.steps) {
            result.loss_curve.emplace_back(step, loss_value);
        }
    }
    return result;
}

RolloutResult rollout_in_context(CausalPolicy& policy, ToyEnv& env, const Episode& prompt,
                                 std::size_t prompt_task_index, int max_steps) {
    NoGradGuard ng;
    RolloutResult result;
    result.episode.task_id = to_string(env.state().task);
    result.episode.obs_dim = ToyEnv::kObsDim;
    result.episode.act_dim = ToyEnv::kActDim;
    std::vector<Scalar> query_obs;
    for (int step = 0; step < max_steps && !env.done(); ++step) {
        const auto obs = env.observe();
        query_obs.insert(query_obs.end(), obs.begin(), obs.end());
        const std::size_t n = query_obs.size() / ToyEnv::kObsDim;
        const auto action = policy.predict_action(prompt, query_obs, n, prompt_task_index);
        result.episode.obs.insert(result.episode.obs.end(), obs.begin(), obs.end());
        result.episode.act.insert(result.episode.act.end(), action.begin(), action.end());
        env.step(action);
    }
    result.success = env.success();
    result.episode.success = result.success;
    return result;
}

double evaluate_success(CausalPolicy& policy, const std::vector<Episode>& dataset,
                        TaskFamily env_family, TaskFamily prompt_family, int episodes,
                        std::uint64_t seed) {
    std::vector<std::size_t> prompt_pool;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].task_id == to_string(prompt_family) && dataset[i].success) {
            prompt_pool.push_back(i);
        }
    }
    if (prompt_pool.empty()) {
        throw UsageError("evaluate_success: no successful prompts for family " +
                         to_string(prompt_family));
    }
    ToyEnv env(env_family);
    // Env seeds depend only on (seed, env task, episode index): every policy
    // sees the same scenarios.
    Rng env_rng = Rng(seed).child("eval-env-" + to_string(env_family));
    Rng prompt_rng = Rng(seed).child("eval-prompt-" + to_string(prompt_family));
    int ok = 0;
    for (int i = 0; i < episodes; ++i) {
        Rng er = env_rng.child("episode", static_cast<std::uint64_t>(i));
        env.reset(er);
        const Episode& prompt = dataset[prompt_pool[prompt_rng.uniform_index(prompt_pool.size())]];
        const auto result = rollout_in_context(policy, env, prompt,
                                               static_cast<std::size_t>(prompt_family),
                                               env.config().horizon);
        ok += result.success ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(episodes);
}

double SuiteReport::mean_success(TokenizerKind kind, TaskFamily task) const {
    double total = 0;
    int count = 0;
    for (const SuiteCell& cell : cells) {
        if (cell.kind != kind || cell.diverged) continue;
        const auto it = cell.success.find(task);
        if (it == cell.success.end()) continue;
        total += it->second;
        ++count;
    }
    return count == 0 ? 0.0 : total / count;
}

double SuiteReport::mean_success_overall(TokenizerKind kind) const {
    double total = 0;
    int count = 0;
    for (const SuiteCell& cell : cells) {
        if (cell.kind != kind || cell.diverged) continue;
        for (const auto& [task, rate] : cell.success) {
            total += rate;
            ++count;
        }
    }
    return count == 0 ? 0.0 : total / count;
}

double SuiteReport::mean_smoothness(TokenizerKind kind) const {
    double total = 0;
    int count = 0;
    for (const SuiteCell& cell : cells) {
        if (cell.kind != kind || cell.diverged) continue;
        total += cell.smoothness;
        ++count;
    }
    return count == 0 ? 0.0 : total / count;
}

double SuiteReport::smoothness_success_spearman(const std::vector<TokenizerKind>& kinds) const {
    std::vector<double> smooth, success;
    for (TokenizerKind kind : kinds) {
        smooth.push_back(mean_smoothness(kind));
        success.push_back(mean_success_overall(kind));
    }
    return spearman(smooth, success);
}

SuiteReport evaluate_tokenizer_suite(const std::vector<Episode>& dataset,
                                     const SuiteConfig& config) {
    if (config.seeds.empty() || config.kinds.empty()) {
        throw UsageError("evaluate_tokenizer_suite: need at least one kind and one seed");
    }
    SuiteReport report;
    report.cells.resize(config.kinds.size() * config.seeds.size());
    run_parallel(report.cells.size(), config.workers, [&](std::size_t cell_idx) {
        const TokenizerKind kind = config.kinds[cell_idx / config.seeds.size()];
        const std::uint64_t seed = config.seeds[cell_idx % config.seeds.size()];
        SuiteCell cell;
        cell.kind = kind;
        cell.seed = seed;
        try {
            TokenizerConfig tcfg = config.tokenizer_base;
            tcfg.kind = kind;
            tcfg.lipschitz = (kind == TokenizerKind::LipVqVae);
            Rng init_rng = Rng(seed).child("policy-init-" + to_string(kind));
            CausalPolicy policy(config.policy_base, tcfg, init_rng);

            PolicyTrainConfig tc = config.train;
            tc.seed = Rng(seed).child("train-" + to_string(kind)).seed();
            const auto train_result = train_policy(policy, dataset, tc);
            if (!train_result.loss_curve.empty()) {
                cell.final_loss = train_result.loss_curve.back().second;
            }

            for (TaskFamily task : config.tasks) {
                cell.success[task] =
                    evaluate_success(policy, dataset, task, task,
                                     config.eval_episodes_per_task, seed);
            }

            const auto trajs = encode_trajectories(
                policy.tokenizer(), dataset,
                std::min(config.smoothness_trajectories, dataset.size()), to_string(kind));
            double total = 0;
            for (const auto& t : trajs) total += least_energy_score(t);
            cell.smoothness = trajs.empty() ? 0.0 : total / static_cast<double>(trajs.size());
        } catch (const Error& e) {
            cell.diverged = true;
            cell.error = e.what();
        }
        report.cells[cell_idx] = std::move(cell);
    });
    return report;
}

}  // namespace liptok
