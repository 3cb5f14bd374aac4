#pragma once

#include "liptok/dataset.hpp"
#include "liptok/rng.hpp"

namespace liptok {

enum class TaskFamily { Reach, PickPlace, Push };

std::string to_string(TaskFamily task);
TaskFamily task_from_string(const std::string& name);

struct Vec2 {
    Scalar x = 0;
    Scalar y = 0;
};

struct ToyEnvConfig {
    int horizon = 50;
    Scalar speed = Scalar{0.1};            // per-step displacement cap (norm)
    Scalar contact = Scalar{0.06};         // rigid-disk pushing radius
    Scalar grasp_range = Scalar{0.08};     // max distance for a grasp
    Scalar success_radius = Scalar{0.05};
    Scalar workspace = Scalar{1.0};        // positions clamp to [-w, w]^2
};

struct ToyEnvState {
    Vec2 agent, object, goal;
    bool holding = false;
    Vec2 hold_offset;
    int step = 0;
    TaskFamily task = TaskFamily::Reach;
};

// 2D manipulation environment with three task families sharing one dynamics
// rule set: the agent pushes the object on contact (rigid disks) and can
// grasp/release it with the gripper channel. Fully deterministic given the
// reset rng.
class ToyEnv {
  public:
    static constexpr std::size_t kObsDim = 9;
    static constexpr std::size_t kActDim = 3;

    explicit ToyEnv(TaskFamily task, ToyEnvConfig config = {});

    void reset(Rng& rng);
    const ToyEnvState& state() const { return state_; }
    const ToyEnvConfig& config() const { return config_; }

    // [agent xy, object xy, goal xy, gripper open, gripper holding, step/horizon]
    std::vector<Scalar> observe() const;

    // action = (dx, dy, gripper); displacement norm-clamped to speed,
    // gripper > 0 commands close/grasp, <= 0 commands open/release.
    void step(std::span<const Scalar> action);

    bool success() const;
    bool done() const { return success() || state_.step >= config_.horizon; }

  private:
    ToyEnvConfig config_;
    ToyEnvState state_;
};

// Deterministic proportional controller toward the current subgoal with the
// same speed cap as the environment; gripper toggles at proximity thresholds.
std::vector<Scalar> scripted_expert(const ToyEnvState& state, const ToyEnvConfig& config);

// Roll the scripted expert in a freshly reset env; expert episodes end in
// success within the horizon. With action_noise > 0 the *executed* motion is
// perturbed while the recorded labels stay the expert's corrective actions,
// which widens the state coverage around the expert rail; episodes that the
// noise pushes into failure are resampled.
Episode run_expert_episode(ToyEnv& env, Rng& rng, Scalar action_noise = 0);

// N expert episodes per task family, order: families as given, then index.
std::vector<Episode> synth_icil_dataset(const std::vector<TaskFamily>& families, int per_family,
                                        Rng& rng, ToyEnvConfig config = {},
                                        Scalar action_noise = 0);

}  // namespace liptok
