#include <bit>
#include <random>

#include "doctest.h"
#include "dor/reachability.hpp"
#include "random_models.hpp"

using namespace dor;

namespace {

// One agent, two cells; "go" reaches the unsafe cell with probability p,
// "stay" is safe. Unsafe cell absorbs.
Mmdp risky_step(double p) {
    MmdpBuilder b;
    b.agents({"1"});
    b.state_labels(0, {"safe", "bad"});
    b.action_labels(0, {"go", "stay"});
    b.unsafe(UnsafeSpec::forbidden("1", {"bad"}));
    b.transition(0, 0, 1, p);
    b.transition(0, 0, 0, 1.0 - p);
    b.transition(0, 1, 0, 1.0);
    b.transition(1, 0, 1, 1.0);
    b.transition(1, 1, 1, 1.0);
    return b.finish();
}

}  // namespace

TEST_CASE("stage zero is the unsafe indicator and unsafe rows stay at one") {
    Mmdp m = risky_step(0.3);
    QTable q = compute_q(m, 3);
    for (std::uint32_t a = 0; a < 2; ++a) {
        CHECK(q.at(1, a, 0) == 1.0);
        CHECK(q.at(0, a, 0) == 0.0);
        for (std::uint32_t t = 0; t <= 3; ++t) CHECK(q.at(1, a, t) == 1.0);
    }
}

TEST_CASE("one risky step evaluates to its transition probability") {
    Mmdp m = risky_step(0.3);
    QTable q = compute_q(m, 2);
    CHECK(q.at(0, 0, 1) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(q.at(0, 1, 1) == 0.0);
    CHECK(q.min_value(0, 1) == 0.0);
    // the safe action keeps the minimum at zero for any horizon
    CHECK(q.at(0, 0, 2) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("a chain forced into the unsafe set reaches value one at stage one") {
    MmdpBuilder b;
    b.agents({"1"});
    b.state_labels(0, {"s", "bad"});
    b.action_labels(0, {"a", "b"});
    b.unsafe(UnsafeSpec::forbidden("1", {"bad"}));
    for (std::uint32_t a = 0; a < 2; ++a) {
        b.transition(0, a, 1, 1.0);  // every action leads into the unsafe cell
        b.transition(1, a, 1, 1.0);
    }
    QTable q = compute_q(b.finish(), 1);
    CHECK(q.at(0, 0, 1) == 1.0);
    CHECK(q.at(0, 1, 1) == 1.0);
}

TEST_CASE("q values stay within the unit interval on random models") {
    std::mt19937_64 rng(7);
    auto instances = dor::testing::random_small_instances(rng, 25);
    for (const auto& inst : instances) {
        auto horizon = static_cast<std::uint32_t>(inst.trajectory.states.size());
        QTable q = compute_q(inst.model, horizon);
        for (JointState s = 0; s < inst.model.states().size(); ++s)
            for (JointAction a : inst.model.admissible_actions(s))
                for (std::uint32_t t = 0; t <= horizon; ++t) {
                    double v = q.at(s, a, t);
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
    }
}

TEST_CASE("safe_joint_action prefers the avoiding action and breaks ties low") {
    Mmdp m = risky_step(1.0);
    QTable q = compute_q(m, 2);
    CHECK(safe_joint_action(m, q, 0, 1) == 1);  // only "stay" avoids

    // all actions equivalent: lexicographically smallest joint index wins
    MmdpBuilder b;
    b.agents({"1"});
    b.state_labels(0, {"s"});
    b.action_labels(0, {"a", "b"});
    b.unsafe(UnsafeSpec::explicit_list({}));
    b.transition(0, 0, 0, 1.0);
    b.transition(0, 1, 0, 1.0);
    Mmdp tie = b.finish();
    QTable qt = compute_q(tie, 1);
    CHECK(safe_joint_action(tie, qt, 0, 1) == 0);
    CHECK_THROWS_AS(safe_joint_action(tie, qt, 0, 0), std::domain_error);
}

TEST_CASE("counterfactual actions keep non-members at their observed moves") {
    std::mt19937_64 rng(11);
    auto instances = dor::testing::random_small_instances(rng, 20);
    for (const auto& inst : instances) {
        const Mmdp& m = inst.model;
        const Trajectory& tr = inst.trajectory;
        auto horizon = static_cast<std::uint32_t>(tr.states.size());
        QTable q = compute_q(m, horizon);
        const CoalitionMask full = full_mask(m.agent_count());
        for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t) {
            CHECK(counterfactual_action(m, q, tr, 0, t) == tr.actions[t]);
            JointAction everyone = counterfactual_action(m, q, tr, full, t);
            JointAction safe = safe_joint_action(
                m, q, tr.states[t], static_cast<std::uint32_t>(tr.states.size() - t));
            CHECK(everyone == safe);
            // members of a singleton coalition only change their own digit
            for (AgentIndex i = 0; i < m.agent_count(); ++i) {
                JointAction single =
                    counterfactual_action(m, q, tr, CoalitionMask(1) << i, t);
                for (AgentIndex j = 0; j < m.agent_count(); ++j)
                    if (j != i)
                        CHECK(m.actions().digit(single, j) == m.actions().digit(tr.actions[t], j));
            }
        }
    }
}

TEST_CASE("an unsafe stage makes every counterfactual certain") {
    Mmdp m = risky_step(1.0);
    Trajectory tr;
    tr.states = {0, 1, 1};
    tr.actions = {0, 0};
    REQUIRE(validate_trajectory(m, tr).ok());
    QTable q = compute_q(m, 3);
    for (CoalitionMask c = 0; c < 2; ++c) CHECK(counterfactual_utility(m, q, tr, c, 1) == 1.0);
    // at stage 0 the coalition can still steer away
    CHECK(counterfactual_utility(m, q, tr, 1, 0) == 0.0);
    CHECK(counterfactual_utility(m, q, tr, 0, 0) == 1.0);
    CHECK_THROWS_AS(counterfactual_utility(m, q, tr, 0, 2), std::domain_error);
}

TEST_CASE("coalition utilities match the brute-force oracle") {
    std::mt19937_64 rng(13);
    auto instances = dor::testing::random_small_instances(rng, 40);
    for (const auto& inst : instances) {
        const Mmdp& m = inst.model;
        const Trajectory& tr = inst.trajectory;
        QTable q = compute_q(m, static_cast<std::uint32_t>(tr.states.size()));
        for (CoalitionMask c = 0; c <= full_mask(m.agent_count()); ++c) {
            double fast = coalition_utility(m, q, tr, c);
            double slow = brute_force_utility(m, tr, c);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
            CHECK(fast >= 0.0);
            CHECK(fast <= double(tr.states.size()));
        }
    }
}

TEST_CASE("larger coalitions never increase the stage utilities") {
    std::mt19937_64 rng(17);
    auto instances = dor::testing::random_small_instances(rng, 30);
    for (const auto& inst : instances) {
        const Mmdp& m = inst.model;
        const Trajectory& tr = inst.trajectory;
        QTable q = compute_q(m, static_cast<std::uint32_t>(tr.states.size()));
        const CoalitionMask full = full_mask(m.agent_count());
        for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t) {
            for (CoalitionMask small = 0; small <= full; ++small) {
                for (CoalitionMask large = small; large <= full; ++large) {
                    if ((small & large) != small) continue;
                    CHECK(counterfactual_utility(m, q, tr, small, t) >=
                          counterfactual_utility(m, q, tr, large, t));
                }
            }
        }
        CHECK(coalition_utility(m, q, tr, full) <= coalition_utility(m, q, tr, 0));
    }
}

TEST_CASE("guards refuse oversized tables and enumerations") {
    Mmdp m = risky_step(0.5);
    QOptions opts;
    opts.cell_budget = 3;
    CHECK_THROWS_AS(compute_q(m, 2, opts), guard_error);

    Trajectory tr;
    tr.states = {0, 1};
    tr.actions = {0};
    CHECK_THROWS_AS(brute_force_utility(m, tr, 0, 2), guard_error);
}

TEST_CASE("identical inputs give bit-identical tables, serial or threaded") {
    std::mt19937_64 rng(23);
    auto inst = dor::testing::random_small_instances(rng, 1).front();
    auto horizon = static_cast<std::uint32_t>(inst.trajectory.states.size());
    QTable a = compute_q(inst.model, horizon);
    QTable b = compute_q(inst.model, horizon);
    QOptions force_threads;
    force_threads.parallel_threshold = 1;
    QTable c = compute_q(inst.model, horizon, force_threads);
    for (JointState s = 0; s < inst.model.states().size(); ++s) {
        for (JointAction ja : inst.model.admissible_actions(s)) {
            for (std::uint32_t t = 0; t <= horizon; ++t) {
                CHECK(a.at(s, ja, t) == b.at(s, ja, t));
                CHECK(a.at(s, ja, t) == c.at(s, ja, t));
            }
        }
    }
}

TEST_CASE("a single-state violating trajectory carries only the terminal term") {
    Mmdp m = risky_step(0.5);
    Trajectory tr;
    tr.states = {1};  // already in the unsafe cell, nothing was ever decided
    QTable q = compute_q(m, 1);
    for (CoalitionMask c = 0; c < 2; ++c) {
        CHECK(coalition_utility(m, q, tr, c) == 1.0);
        CHECK(brute_force_utility(m, tr, c) == 1.0);
    }
    // identical utilities for every coalition: nobody is responsible
    auto u = [&](CoalitionMask c) { return coalition_utility(m, q, tr, c); };
    auto psi = dor_from_shapley(shapley(u, 1));
    CHECK(psi[0] == 0.0);
}

TEST_CASE("extracted safe policy matches per-state argmin") {
    Mmdp m = risky_step(0.8);
    QTable q = compute_q(m, 3);
    PolicySpec policy = safe_policy(m, q);
    for (std::uint32_t stg = 1; stg <= 3; ++stg)
        for (JointState s = 0; s < m.states().size(); ++s)
            CHECK(policy.at(s, stg) == safe_joint_action(m, q, s, stg));
}
