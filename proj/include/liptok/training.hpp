#pragma once

#include <map>

#include "liptok/policy.hpp"

namespace liptok {

struct PolicyTrainConfig {
    int steps = 20000;
    int batch = 16;
    Scalar lr = Scalar{3e-4};
    int warmup_steps = 100;
    std::uint64_t seed = 0;
    int log_every = 50;
};

struct PolicyTrainResult {
    std::vector<std::pair<int, double>> loss_curve;  // (step, batch loss)
};

std::size_t task_index_of(const std::string& task_id);

// Joint behavior-cloning + tokenizer training. Each batch element pairs a
// prompt and a distinct query episode from the same task family; the loss is
// the query-slot action MSE plus the tokenizer objective over all actions in
// the batch. Throws TrainingError on divergence.
PolicyTrainResult train_policy(CausalPolicy& policy, const std::vector<Episode>& dataset,
                               const PolicyTrainConfig& config);

struct RolloutResult {
    Episode episode;
    bool success = false;
};

// Closed-loop in-context rollout: the prompt stays fixed, query observations
// accumulate, one action is predicted and executed per step. The env must be
// freshly reset.
RolloutResult rollout_in_context(CausalPolicy& policy, ToyEnv& env, const Episode& prompt,
                                 std::size_t prompt_task_index, int max_steps);

// Mean success over `episodes` paired rollouts: env task is env_family while
// the prompt (and the task embedding fed to the policy) comes from
// prompt_family. Env seeds depend only on `seed`, so different policies see
// identical evaluation scenarios.
double evaluate_success(CausalPolicy& policy, const std::vector<Episode>& dataset,
                        TaskFamily env_family, TaskFamily prompt_family, int episodes,
                        std::uint64_t seed);

struct SuiteConfig {
    std::vector<TokenizerKind> kinds = {TokenizerKind::Mlp, TokenizerKind::Bin,
                                        TokenizerKind::VqVae, TokenizerKind::LfqVae,
                                        TokenizerKind::LipVqVae};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::vector<TaskFamily> tasks = {TaskFamily::Reach, TaskFamily::PickPlace, TaskFamily::Push};
    PolicyTrainConfig train;
    TokenizerConfig tokenizer_base;  // kind field overridden per cell
    PolicyConfig policy_base;
    int eval_episodes_per_task = 50;
    std::size_t smoothness_trajectories = 200;
    std::size_t workers = 1;
};

struct SuiteCell {
    TokenizerKind kind{};
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string error;
    std::map<TaskFamily, double> success;   // per-task success rate
    double smoothness = 0;                  // mean least-energy on dataset latents
    double final_loss = 0;
};

struct SuiteReport {
    std::vector<SuiteCell> cells;

    double mean_success(TokenizerKind kind, TaskFamily task) const;
    double mean_success_overall(TokenizerKind kind) const;
    double mean_smoothness(TokenizerKind kind) const;
    // Spearman rank correlation between per-kind mean smoothness and per-kind
    // mean overall success.
    double smoothness_success_spearman(const std::vector<TokenizerKind>& kinds) const;
};

// Trains and evaluates one policy per (kind, seed) with identical budgets and
// paired evaluation scenarios; diverged cells are marked and excluded from
// the means.
SuiteReport evaluate_tokenizer_suite(const std::vector<Episode>& dataset, const SuiteConfig& config);

}  // namespace liptok
