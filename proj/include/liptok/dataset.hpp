#pragma once

#include <string>
#include <vector>

#include "liptok/tensor.hpp"

namespace liptok {

// One recorded episode. Observations and actions are stored flat, row-major,
// with equal lengths; expert-generated episodes always end in success.
struct Episode {
    std::string task_id;
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    std::vector<Scalar> obs;  // T × obs_dim
    std::vector<Scalar> act;  // T × act_dim
    bool success = false;

    std::size_t length() const { return act_dim == 0 ? 0 : act.size() / act_dim; }
    std::span<const Scalar> obs_at(std::size_t t) const {
        return {obs.data() + t * obs_dim, obs_dim};
    }
    std::span<const Scalar> act_at(std::size_t t) const {
        return {act.data() + t * act_dim, act_dim};
    }
    void validate() const;
};

// Line-delimited dataset: one JSON episode per line with fields task_id,
// obs (T rows of O numbers), act (T rows of A numbers), success.
std::vector<Episode> load_dataset(const std::string& path);
std::string dataset_to_string(const std::vector<Episode>& episodes);
void save_dataset(const std::vector<Episode>& episodes, const std::string& path);

// All actions of all episodes pooled into one [N, A] tensor.
Tensor dataset_actions(const std::vector<Episode>& episodes);

struct MinJerkConfig {
    int episodes = 500;
    std::size_t dims = 7;
    int min_steps = 160;
    int max_steps = 240;
    // Each dimension follows its own minimum-jerk profile inside a random
    // sub-window of the episode, so trajectories curve through all dims.
    double window_jitter = 0.2;  // fraction of T for start/end jitter
};

// Smooth synthetic action trajectories (quintic minimum-jerk position
// profiles, emitted as per-step deltas). Near-zero bending energy by
// construction.
std::vector<Episode> synth_minjerk(const MinJerkConfig& config, Rng& rng);

}  // namespace liptok
