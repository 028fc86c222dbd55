#include <random>

#include "doctest.h"
#include "dor/identification.hpp"
#include "dor/scenario.hpp"
#include "random_models.hpp"

using namespace dor;

namespace {

CompiledScenario builtin(BuiltinScenario id) {
    return compile_and_validate(builtin_scenario(id));
}

}  // namespace

TEST_CASE("an agent with a singleton action set can never improve") {
    CompiledScenario s2 = builtin(BuiltinScenario::Nhtsa2);
    const Mmdp& m = s2.model();
    QTable q = compute_q(m, static_cast<std::uint32_t>(s2.trajectory.states.size()));
    for (std::size_t t = 0; t + 2 <= s2.trajectory.states.size(); ++t) {
        auto imp = marginal_improvement(m, q, s2.trajectory, 1, t);  // agent "2"
        CHECK(imp.improvement == 0.0);
    }
}

TEST_CASE("a stop that avoids a certain collision improves by one") {
    CompiledScenario s2 = builtin(BuiltinScenario::Nhtsa2);
    const Mmdp& m = s2.model();
    QTable q = compute_q(m, static_cast<std::uint32_t>(s2.trajectory.states.size()));
    auto imp = marginal_improvement(m, q, s2.trajectory, 0, 1);  // agent "1" at cell 6
    CHECK(imp.improvement == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.action_labels(0)[imp.best_action] == "stop");
}

TEST_CASE("screening flags exactly the causally flexible agents on the builtins") {
    CHECK(identify_responsible(builtin(BuiltinScenario::Nhtsa1).model(),
                               builtin(BuiltinScenario::Nhtsa1).trajectory, 1e-6) == 0b001u);
    CHECK(identify_responsible(builtin(BuiltinScenario::Nhtsa2).model(),
                               builtin(BuiltinScenario::Nhtsa2).trajectory, 1e-6) == 0b101u);
    CHECK(identify_responsible(builtin(BuiltinScenario::Nhtsa3).model(),
                               builtin(BuiltinScenario::Nhtsa3).trajectory, 1e-6) == 0b01u);
}

TEST_CASE("a model with no useful deviation yields an empty set") {
    // one agent, both actions lead into the unsafe cell
    MmdpBuilder b;
    b.agents({"1"});
    b.state_labels(0, {"s", "bad"});
    b.action_labels(0, {"a", "b"});
    b.unsafe(UnsafeSpec::forbidden("1", {"bad"}));
    for (std::uint32_t a = 0; a < 2; ++a) {
        b.transition(0, a, 1, 1.0);
        b.transition(1, a, 1, 1.0);
    }
    Mmdp m = b.finish();
    Trajectory tr;
    tr.states = {0, 1};
    tr.actions = {0};
    CHECK(identify_responsible(m, tr, 1e-6) == 0u);
}

TEST_CASE("raising epsilon can only shrink the responsible set") {
    std::mt19937_64 rng(31);
    auto instances = dor::testing::random_small_instances(rng, 25);
    const double thresholds[] = {1e-9, 1e-3, 0.05, 0.3, 0.9};
    for (const auto& inst : instances) {
        QTable q = compute_q(inst.model,
                             static_cast<std::uint32_t>(inst.trajectory.states.size()));
        CoalitionMask previous = full_mask(inst.model.agent_count());
        for (double eps : thresholds) {
            CoalitionMask r = identify_responsible(inst.model, q, inst.trajectory, eps);
            CHECK((r & previous) == r);  // r is a subset of the looser set
            previous = r;
        }
    }
}

TEST_CASE("invalid stages and thresholds are rejected") {
    CompiledScenario s1 = builtin(BuiltinScenario::Nhtsa1);
    QTable q = compute_q(s1.model(), static_cast<std::uint32_t>(s1.trajectory.states.size()));
    CHECK_THROWS_AS(marginal_improvement(s1.model(), q, s1.trajectory, 0,
                                         s1.trajectory.states.size() - 1),
                    std::domain_error);
    CHECK_THROWS_AS(identify_responsible(s1.model(), s1.trajectory, 0.0), std::domain_error);
    CHECK_THROWS_AS(identify_responsible(s1.model(), s1.trajectory, -1.0), std::domain_error);
}

TEST_CASE("improvements carry the maximizing alternative") {
    std::mt19937_64 rng(37);
    auto instances = dor::testing::random_small_instances(rng, 15);
    for (const auto& inst : instances) {
        const Mmdp& m = inst.model;
        auto horizon = static_cast<std::uint32_t>(inst.trajectory.states.size());
        QTable q = compute_q(m, horizon);
        for (const auto& imp : marginal_improvements(m, q, inst.trajectory)) {
            CHECK(imp.improvement >= 0.0);
            const JointState s = inst.trajectory.states[imp.stage];
            const JointAction observed = inst.trajectory.actions[imp.stage];
            const auto stages = static_cast<std::uint32_t>(horizon - imp.stage);
            const double observed_q = q.at(s, observed, stages);
            // no admissible alternative beats the reported improvement
            for (std::uint32_t alt :
                 m.admissible_local(imp.agent, m.states().digit(s, imp.agent))) {
                double v = q.at(s, m.actions().with_digit(observed, imp.agent, alt), stages);
                CHECK(observed_q - v <= imp.improvement + 1e-15);
            }
        }
    }
}
