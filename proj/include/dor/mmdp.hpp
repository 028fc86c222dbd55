#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dor/types.hpp"

namespace dor {

/// Identifies the unsafe subset of the joint state space. Three forms:
///   - ExplicitList: an enumerated set of joint states,
///   - Collision: unsafe iff two agents occupy the same location label,
///   - Forbidden: unsafe iff a given agent is in one of a set of locations.
struct UnsafeSpec {
    enum class Kind { ExplicitList, Collision, Forbidden };

    Kind kind = Kind::Collision;
    std::vector<std::vector<std::string>> explicit_states;  // per-agent labels
    std::string forbidden_agent;
    std::vector<std::string> forbidden_locations;

    static UnsafeSpec collision() { return UnsafeSpec{}; }
    static UnsafeSpec explicit_list(std::vector<std::vector<std::string>> states) {
        UnsafeSpec u;
        u.kind = Kind::ExplicitList;
        u.explicit_states = std::move(states);
        return u;
    }
    static UnsafeSpec forbidden(std::string agent, std::vector<std::string> locations) {
        UnsafeSpec u;
        u.kind = Kind::Forbidden;
        u.forbidden_agent = std::move(agent);
        u.forbidden_locations = std::move(locations);
        return u;
    }
};

/// Finite multi-agent MDP with per-agent state/action sets, a sparse joint
/// transition table, per-agent admissibility restrictions, and an unsafe-set
/// predicate. Immutable after construction; all queries are const and safe
/// to call concurrently.
class Mmdp {
  public:
    Mmdp() = default;

    const std::vector<std::string>& agents() const { return agents_; }
    std::size_t agent_count() const { return agents_.size(); }
    const IndexSpace& states() const { return states_; }
    const IndexSpace& actions() const { return actions_; }
    const std::vector<std::string>& state_labels(AgentIndex i) const { return state_labels_.at(i); }
    const std::vector<std::string>& action_labels(AgentIndex i) const {
        return action_labels_.at(i);
    }
    const UnsafeSpec& unsafe_spec() const { return unsafe_; }

    bool is_unsafe(JointState s) const;

    /// Stored probability of (s, a) -> s2; absent sparse entries are 0.
    /// Throws std::domain_error if `a` is inadmissible at `s`.
    double transition_prob(JointState s, JointAction a, JointState s2) const;

    /// Successor list for (s, a), sorted by successor index. Empty when the
    /// model stores no row. Does not check admissibility.
    const std::vector<std::pair<JointState, double>>& successors(JointState s,
                                                                 JointAction a) const;

    /// Per-agent admissible local actions for agent i in local state si.
    const std::vector<std::uint32_t>& admissible_local(AgentIndex i, std::uint32_t si) const {
        return admissible_.at(i).at(si);
    }

    /// Joint action admissibility: every component admissible for its agent.
    bool action_admissible(JointState s, JointAction a) const;

    /// All admissible joint actions at s, ascending (lexicographic) order.
    std::vector<JointAction> admissible_actions(JointState s) const;

    std::uint32_t location_id(AgentIndex i, std::uint32_t si) const {
        return location_ids_.at(i).at(si);
    }

    std::size_t transition_row_count() const { return transitions_.size(); }

    friend class MmdpBuilder;

  private:
    std::vector<std::string> agents_;
    std::vector<std::vector<std::string>> state_labels_;
    std::vector<std::vector<std::string>> action_labels_;
    IndexSpace states_;
    IndexSpace actions_;
    // admissible_[agent][local_state] = sorted local action indices
    std::vector<std::vector<std::vector<std::uint32_t>>> admissible_;
    std::unordered_map<std::uint64_t, std::vector<std::pair<JointState, double>>> transitions_;
    UnsafeSpec unsafe_;
    // interned location ids shared across agents, for the collision predicate
    std::vector<std::vector<std::uint32_t>> location_ids_;
    std::unordered_set<std::uint64_t> explicit_unsafe_;  // joint indices
    AgentIndex forbidden_agent_index_ = 0;
    std::vector<bool> forbidden_local_;  // per local state of forbidden agent

    std::uint64_t sa_key(JointState s, JointAction a) const {
        return std::uint64_t(s) * actions_.size() + a;
    }
};

/// Incremental construction of an Mmdp. Duplicate (s, a, s2) entries are
/// accumulated; successor lists are sorted at finish() so downstream sums
/// iterate in a fixed order.
class MmdpBuilder {
  public:
    MmdpBuilder& agents(std::vector<std::string> names);
    MmdpBuilder& state_labels(AgentIndex i, std::vector<std::string> labels);
    MmdpBuilder& action_labels(AgentIndex i, std::vector<std::string> labels);
    /// Restrict agent i's admissible actions in local state `state` to `allow`
    /// (local action indices). Default when never called: all actions.
    MmdpBuilder& admissible(AgentIndex i, std::uint32_t state, std::vector<std::uint32_t> allow);
    MmdpBuilder& transition(JointState s, JointAction a, JointState s2, double p);
    MmdpBuilder& unsafe(UnsafeSpec spec);

    /// Convenience for per-agent digit tuples.
    MmdpBuilder& transition_t(std::span<const std::uint32_t> s, std::span<const std::uint32_t> a,
                              std::span<const std::uint32_t> s2, double p);

    const IndexSpace& state_space();
    const IndexSpace& action_space();

    Mmdp finish();

  private:
    Mmdp m_;
    bool spaces_ready_ = false;
    void ensure_spaces();
};

/// One trajectory observed on an Mmdp: T joint states and T-1 joint actions.
/// `violation` marks the path as a safety-violation instance, requiring the
/// final state to be unsafe.
struct Trajectory {
    std::vector<JointState> states;
    std::vector<JointAction> actions;
    bool violation = true;

    std::size_t horizon() const { return states.size(); }
};

struct ValidationIssue {
    std::string code;
    std::string where;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks probability ranges, row sums (1 within 1e-9 for every admissible
/// state-action pair), and absorption of the unsafe set. Never mutates input.
ValidationReport validate_mmdp(const Mmdp& m);

/// Checks shape, per-step admissibility, positive step probabilities, and
/// (when flagged as a violation) unsafety of the terminal state.
ValidationReport validate_trajectory(const Mmdp& m, const Trajectory& tr);

}  // namespace dor
