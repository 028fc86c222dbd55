#pragma once

#include <cstdint>
#include <vector>

#include "dor/mmdp.hpp"
#include "dor/types.hpp"

namespace dor {

struct QOptions {
    /// Refuse to allocate tables with more value cells than this.
    std::uint64_t cell_budget = 100'000'000;
    /// Parallelize stages over joint states above this state count.
    std::uint64_t parallel_threshold = 4096;
};

/// Finite-horizon unsafe-reachability table. values(s, a, t) is the
/// probability of reaching the unsafe set within t stages when starting in s,
/// taking a, and acting to minimize that probability afterwards.
///
/// Invariants: values in [0,1]; t = 0 slice is the unsafe indicator; unsafe
/// states hold value 1 at every stage. Inadmissible (s, a) cells are NaN and
/// reject reads.
class QTable {
  public:
    QTable() = default;
    QTable(std::uint32_t horizon, std::uint64_t n_states, std::uint64_t n_actions);

    std::uint32_t horizon() const { return horizon_; }
    std::uint64_t state_count() const { return n_states_; }
    std::uint64_t action_count() const { return n_actions_; }

    double at(JointState s, JointAction a, std::uint32_t t) const;

    /// min over admissible actions, precomputed per stage.
    double min_value(JointState s, std::uint32_t t) const;

    double* stage(std::uint32_t t) { return values_.data() + std::size_t(t) * stage_stride_; }
    const double* stage(std::uint32_t t) const {
        return values_.data() + std::size_t(t) * stage_stride_;
    }
    double* mins(std::uint32_t t) { return mins_.data() + std::size_t(t) * n_states_; }
    const double* mins(std::uint32_t t) const {
        return mins_.data() + std::size_t(t) * n_states_;
    }

    std::uint64_t cell_count() const { return values_.size(); }

  private:
    std::uint32_t horizon_ = 0;
    std::uint64_t n_states_ = 0;
    std::uint64_t n_actions_ = 0;
    std::size_t stage_stride_ = 0;
    std::vector<double> values_;  // (horizon+1) x states x actions
    std::vector<double> mins_;    // (horizon+1) x states
};

/// Builds the full reachability table for the given horizon. The stage-0
/// slice is the unsafe indicator; each later stage applies one step of the
/// minimizing recursion. Deterministic: iteration order is fixed regardless
/// of thread count.
QTable compute_q(const Mmdp& m, std::uint32_t horizon, const QOptions& opts = {});

/// Admissible joint action minimizing q(s, ., stages_to_go); ties broken by
/// smallest joint action index.
JointAction safe_joint_action(const Mmdp& m, const QTable& q, JointState s,
                              std::uint32_t stages_to_go);

/// Joint action of the counterfactual world at stage t: coalition members
/// jointly minimize q(states[t], ., T-t) over their own admissible actions,
/// everyone else keeps the observed component. Ties break by smallest joint
/// action index.
JointAction counterfactual_action(const Mmdp& m, const QTable& q, const Trajectory& tr,
                                  CoalitionMask coalition, std::size_t t);

/// q evaluated at the counterfactual action: the minimized probability of
/// reaching the unsafe set from stage t onwards.
double counterfactual_utility(const Mmdp& m, const QTable& q, const Trajectory& tr,
                              CoalitionMask coalition, std::size_t t);

/// Coalition utility: sum of counterfactual utilities over stages 0..T-2 plus
/// the coalition-independent terminal indicator of the final state being
/// unsafe. Requires q.horizon() >= T.
double coalition_utility(const Mmdp& m, const QTable& q, const Trajectory& tr,
                         CoalitionMask coalition);

/// Independent oracle for coalition_utility: recursive enumeration over all
/// admissible actions and stochastic branches, never touching a QTable.
/// Refuses models where prod |S_i| * prod |A_i| * T exceeds `leaf_guard`.
double brute_force_utility(const Mmdp& m, const Trajectory& tr, CoalitionMask coalition,
                           std::uint64_t leaf_guard = 1'000'000);

/// Non-stationary deterministic joint policy as a (stage, state) -> action
/// table; stage index counts stages-to-go from 1 to horizon.
struct PolicySpec {
    std::uint32_t horizon = 0;
    std::uint64_t n_states = 0;
    std::vector<JointAction> actions;  // [stages_to_go - 1][state]

    JointAction at(JointState s, std::uint32_t stages_to_go) const {
        return actions.at(std::size_t(stages_to_go - 1) * n_states + s);
    }
};

/// Extracts the minimizing safe policy from a reachability table.
PolicySpec safe_policy(const Mmdp& m, const QTable& q);

}  // namespace dor
