#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "liptok/env.hpp"
#include "liptok/smoothness.hpp"
#include "liptok/textio.hpp"

using namespace liptok;

TEST_CASE("expert emits a zero action when the reach goal is met") {
    ToyEnvConfig cfg;
    ToyEnvState s;
    s.task = TaskFamily::Reach;
    s.agent = {0.25, -0.5};
    s.goal = {0.25, -0.5};
    const auto a = scripted_expert(s, cfg);
    CHECK(a[0] == 0.0);
    CHECK(a[1] == 0.0);
}

TEST_CASE("expert walks a straight line on an axis-aligned reach task") {
    ToyEnvConfig cfg;
    ToyEnv env(TaskFamily::Reach, cfg);
    Rng rng(1);
    env.reset(rng);
    // Force the canonical configuration.
    ToyEnvState s = env.state();
    s.agent = {-0.5, 0.0};
    s.goal = {0.5, 0.0};
    for (int step = 0; step < 9; ++step) {
        const auto a = scripted_expert(s, cfg);
        CHECK(a[0] == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(a[1] == 0.0);
        s.agent.x += a[0];
        s.agent.y += a[1];
    }
    // Final step lands exactly on the goal.
    const auto last = scripted_expert(s, cfg);
    CHECK(s.agent.x + last[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scripted experts succeed on 1000 random episodes per family") {
    for (TaskFamily family : {TaskFamily::Reach, TaskFamily::PickPlace, TaskFamily::Push}) {
        ToyEnv env(family);
        Rng rng(1234);
        int successes = 0;
        std::size_t min_len = 1000;
        for (int i = 0; i < 1000; ++i) {
            Rng er = rng.child(to_string(family), static_cast<std::uint64_t>(i));
            const Episode ep = run_expert_episode(env, er);
            successes += ep.success ? 1 : 0;
            min_len = std::min(min_len, ep.length());
        }
        CHECK(successes == 1000);
        CHECK(min_len >= 3);  // prompt trajectories stay usable for the metric
    }
}

TEST_CASE("observation layout and dynamics basics") {
    ToyEnv env(TaskFamily::PickPlace);
    Rng rng(5);
    env.reset(rng);
    const auto obs = env.observe();
    REQUIRE(obs.size() == ToyEnv::kObsDim);
    CHECK(obs[0] == env.state().agent.x);
    CHECK(obs[5] == env.state().goal.y);
    CHECK(obs[6] == 1.0);  // gripper open
    CHECK(obs[7] == 0.0);  // not holding
    CHECK(obs[8] == 0.0);  // step fraction

    // Displacement is norm-clamped to the speed cap.
    const Vec2 before = env.state().agent;
    std::vector<Scalar> big = {1.0, 1.0, -1.0};
    env.step(big);
    const Vec2 after = env.state().agent;
    const double moved = std::hypot(after.x - before.x, after.y - before.y);
    CHECK(moved == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(env.state().step == 1);

    std::vector<Scalar> bad = {0.0, 0.0};
    CHECK_THROWS_AS(env.step(bad), UsageError);
}

TEST_CASE("grasping picks up and carries the object") {
    ToyEnvConfig cfg;
    ToyEnv env(TaskFamily::PickPlace, cfg);
    Rng rng(11);
    env.reset(rng);
    // Drive the expert loop and verify the object tracks the agent while held.
    bool ever_held = false;
    while (!env.done()) {
        const auto action = scripted_expert(env.state(), env.config());
        env.step(action);
        if (env.state().holding) {
            ever_held = true;
            const double d = std::hypot(env.state().agent.x - env.state().object.x,
                                        env.state().agent.y - env.state().object.y);
            CHECK(d <= cfg.grasp_range + 1e-9);
        }
    }
    CHECK(ever_held);
    CHECK(env.success());
    CHECK(!env.state().holding);  // released at the goal
}

TEST_CASE("expert episodes are deterministic given the seed") {
    ToyEnv env(TaskFamily::Push);
    Rng r1(99), r2(99);
    const Episode a = run_expert_episode(env, r1);
    const Episode b = run_expert_episode(env, r2);
    CHECK(a.act == b.act);
    CHECK(a.obs == b.obs);
}

TEST_CASE("dataset JSONL round trip and validation") {
    Rng rng(21);
    auto episodes = synth_icil_dataset({TaskFamily::Reach, TaskFamily::Push}, 5, rng);
    REQUIRE(episodes.size() == 10);
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "dataset_roundtrip.jsonl").string();
    save_dataset(episodes, path);
    const auto back = load_dataset(path);
    REQUIRE(back.size() == episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        CHECK(back[i].task_id == episodes[i].task_id);
        CHECK(back[i].success == episodes[i].success);
        CHECK(back[i].obs == episodes[i].obs);
        CHECK(back[i].act == episodes[i].act);
    }

    // Same seed, same bytes.
    Rng rng2(21);
    auto episodes2 = synth_icil_dataset({TaskFamily::Reach, TaskFamily::Push}, 5, rng2);
    CHECK(dataset_to_string(episodes) == dataset_to_string(episodes2));

    write_file_atomic(path, "{not json}\n");
    CHECK_THROWS_AS(load_dataset(path), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("minimum-jerk synthesis is smooth and in range") {
    MinJerkConfig mc;
    mc.episodes = 40;
    Rng rng(31);
    const auto episodes = synth_minjerk(mc, rng);
    REQUIRE(episodes.size() == 40);
    for (const Episode& ep : episodes) {
        CHECK(ep.act_dim == 7);
        CHECK(ep.length() >= static_cast<std::size_t>(mc.min_steps));
        CHECK(ep.length() <= static_cast<std::size_t>(mc.max_steps));
        Tensor actions = Tensor::from({ep.length(), ep.act_dim}, ep.act);
        CHECK(least_energy_score(actions) < 0.01);
    }
}
