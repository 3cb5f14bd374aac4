#include "liptok/env.hpp"

#include <cmath>

namespace liptok {

std::string to_string(TaskFamily task) {
    switch (task) {
        case TaskFamily::Reach: return "reach";
        case TaskFamily::PickPlace: return "pick_place";
        case TaskFamily::Push: return "push";
    }
    throw UsageError("unknown task family");
}

TaskFamily task_from_string(const std::string& name) {
    if (name == "reach") return TaskFamily::Reach;
    if (name == "pick_place") return TaskFamily::PickPlace;
    if (name == "push") return TaskFamily::Push;
    throw UsageError("unknown task family: '" + name + "'");
}

namespace {

Scalar dist(const Vec2& a, const Vec2& b) {
    const Scalar dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

Vec2 clamp_box(Vec2 p, Scalar w) {
    p.x = std::clamp(p.x, -w, w);
    p.y = std::clamp(p.y, -w, w);
    return p;
}

// Proportional step toward target, norm-capped.
Vec2 step_toward(const Vec2& from, const Vec2& to, Scalar speed) {
    Vec2 d{to.x - from.x, to.y - from.y};
    const Scalar n = std::sqrt(d.x * d.x + d.y * d.y);
    if (n > speed) {
        d.x *= speed / n;
        d.y *= speed / n;
    }
    return d;
}

}  // namespace

ToyEnv::ToyEnv(TaskFamily task, ToyEnvConfig config) : config_(config) {
    state_.task = task;
}

void ToyEnv::reset(Rng& rng) {
    const Scalar lo = -Scalar{0.75}, hi = Scalar{0.75};
    auto sample = [&] { return Vec2{static_cast<Scalar>(rng.uniform(lo, hi)),
                                    static_cast<Scalar>(rng.uniform(lo, hi))}; };
    const TaskFamily task = state_.task;
    for (;;) {
        ToyEnvState s;
        s.task = task;
        s.agent = sample();
        s.object = sample();
        s.goal = sample();
        const Scalar ag = dist(s.agent, s.goal);
        const Scalar ao = dist(s.agent, s.object);
        const Scalar og = dist(s.object, s.goal);
        if (task == TaskFamily::Reach) {
            if (ag < Scalar{0.3} || ag > Scalar{0.9}) continue;
            if (ao < Scalar{0.15} || dist(s.object, s.goal) < Scalar{0.15}) continue;
        } else {
            if (ao < Scalar{0.25} || ao > Scalar{0.7}) continue;
            if (og < Scalar{0.25} || og > Scalar{0.7}) continue;
            if (ag < Scalar{0.15}) continue;
        }
        state_ = s;
        return;
    }
}

std::vector<Scalar> ToyEnv::observe() const {
    return {state_.agent.x,
            state_.agent.y,
            state_.object.x,
            state_.object.y,
            state_.goal.x,
            state_.goal.y,
            state_.holding ? Scalar{0} : Scalar{1},
            state_.holding ? Scalar{1} : Scalar{0},
            static_cast<Scalar>(state_.step) / static_cast<Scalar>(config_.horizon)};
}

void ToyEnv::step(std::span<const Scalar> action) {
    if (action.size() != kActDim) {
        throw UsageError("env step: expected 3-dim action, got " + std::to_string(action.size()));
    }
    Vec2 delta{action[0], action[1]};
    const Scalar n = std::sqrt(delta.x * delta.x + delta.y * delta.y);
    if (n > config_.speed) {
        delta.x *= config_.speed / n;
        delta.y *= config_.speed / n;
    }
    const Scalar grip = action[2];

    const Vec2 agent_new = clamp_box({state_.agent.x + delta.x, state_.agent.y + delta.y},
                                     config_.workspace);
    if (state_.holding) {
        if (grip <= 0) {
            state_.holding = false;  // release in place
        } else {
            state_.object = clamp_box({agent_new.x + state_.hold_offset.x,
                                       agent_new.y + state_.hold_offset.y},
                                      config_.workspace);
        }
    }
    if (!state_.holding) {
        // Rigid-disk pushing: the object is displaced radially out of the
        // contact radius.
        const Scalar d = dist(agent_new, state_.object);
        if (d < config_.contact) {
            Vec2 dir;
            if (d > Scalar{1e-9}) {
                dir = {(state_.object.x - agent_new.x) / d, (state_.object.y - agent_new.y) / d};
            } else {
                const Scalar dn = std::max(n, Scalar{1e-9});
                dir = {delta.x / dn, delta.y / dn};
            }
            state_.object = clamp_box({agent_new.x + dir.x * config_.contact,
                                       agent_new.y + dir.y * config_.contact},
                                      config_.workspace);
        }
        if (grip > 0 && dist(agent_new, state_.object) <= config_.grasp_range) {
            state_.holding = true;
            state_.hold_offset = {state_.object.x - agent_new.x, state_.object.y - agent_new.y};
        }
    }
    state_.agent = agent_new;
    ++state_.step;
}

bool ToyEnv::success() const {
    switch (state_.task) {
        case TaskFamily::Reach:
            return dist(state_.agent, state_.goal) < config_.success_radius;
        case TaskFamily::PickPlace:
            return !state_.holding && dist(state_.object, state_.goal) < config_.success_radius;
        case TaskFamily::Push:
            return dist(state_.object, state_.goal) < config_.success_radius;
    }
    return false;
}

std::vector<Scalar> scripted_expert(const ToyEnvState& state, const ToyEnvConfig& config) {
    const Scalar open = Scalar{-1}, close = Scalar{1};
    Vec2 move{0, 0};
    Scalar grip = open;
    switch (state.task) {
        case TaskFamily::Reach:
            move = step_toward(state.agent, state.goal, config.speed);
            break;
        case TaskFamily::PickPlace: {
            if (!state.holding) {
                if (dist(state.agent, state.object) > config.grasp_range - Scalar{0.01}) {
                    move = step_toward(state.agent, state.object, config.speed);
                } else {
                    grip = close;  // grasp in place
                }
            } else if (dist(state.object, state.goal) > config.success_radius - Scalar{0.005}) {
                // Drive the carried object toward the goal.
                move = step_toward(state.object, state.goal, config.speed);
                grip = close;
            } else {
                grip = open;  // release at the goal
            }
            break;
        }
        case TaskFamily::Push: {
            // Push from the anti-goal side: reposition behind the object, then
            // drive at a point just short of its center so the contact
            // resolution shoves it toward the goal each step.
            const Scalar og = dist(state.object, state.goal);
            Vec2 ghat{(state.goal.x - state.object.x) / og, (state.goal.y - state.object.y) / og};
            const Scalar ao = dist(state.agent, state.object);
            Scalar align = Scalar{-1};
            if (ao > Scalar{1e-9}) {
                align = ((state.object.x - state.agent.x) / ao) * ghat.x +
                        ((state.object.y - state.agent.y) / ao) * ghat.y;
            }
            if (align > Scalar{0.9} && ao <= config.contact + Scalar{0.01}) {
                const Vec2 aim{state.object.x - Scalar{0.01} * ghat.x,
                               state.object.y - Scalar{0.01} * ghat.y};
                move = step_toward(state.agent, aim, config.speed);
            } else {
                const Vec2 behind{state.object.x - Scalar{0.055} * ghat.x,
                                  state.object.y - Scalar{0.055} * ghat.y};
                move = step_toward(state.agent, behind, config.speed);
            }
            break;
        }
    }
    return {move.x, move.y, grip};
}

Episode run_expert_episode(ToyEnv& env, Rng& rng, Scalar action_noise) {
    for (int attempt = 0; attempt < 16; ++attempt) {
        env.reset(rng);
        Episode ep;
        ep.task_id = to_string(env.state().task);
        ep.obs_dim = ToyEnv::kObsDim;
        ep.act_dim = ToyEnv::kActDim;
        while (!env.done()) {
            const auto obs = env.observe();
            auto action = scripted_expert(env.state(), env.config());
            ep.obs.insert(ep.obs.end(), obs.begin(), obs.end());
            ep.act.insert(ep.act.end(), action.begin(), action.end());
            if (action_noise > 0) {
                action[0] += static_cast<Scalar>(rng.normal(0, action_noise));
                action[1] += static_cast<Scalar>(rng.normal(0, action_noise));
            }
            env.step(action);
        }
        ep.success = env.success();
        if (ep.success && ep.length() >= 3) return ep;
    }
    throw TrainingError("expert failed to produce a successful episode");
}

std::vector<Episode> synth_icil_dataset(const std::vector<TaskFamily>& families, int per_family,
                                        Rng& rng, ToyEnvConfig config, Scalar action_noise) {
    std::vector<Episode> out;
    out.reserve(families.size() * static_cast<std::size_t>(per_family));
    for (TaskFamily family : families) {
        ToyEnv env(family, config);
        Rng family_rng = rng.child(to_string(family));
        for (int i = 0; i < per_family; ++i) {
            Rng episode_rng = family_rng.child("episode", static_cast<std::uint64_t>(i));
            out.push_back(run_expert_episode(env, episode_rng, action_noise));
        }
    }
    return out;
}

}  // namespace liptok
