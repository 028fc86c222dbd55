#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dor/attribution.hpp"
#include "dor/mmdp.hpp"
#include "dor/types.hpp"

namespace dor {

/// Undirected agent interaction graph with precomputable k-hop balls.
class InteractionGraph {
  public:
    InteractionGraph() = default;
    InteractionGraph(std::size_t n_agents, std::vector<std::pair<AgentIndex, AgentIndex>> edges);

    std::size_t agent_count() const { return adjacency_.size(); }
    const std::vector<std::pair<AgentIndex, AgentIndex>>& edges() const { return edges_; }
    const std::vector<AgentIndex>& neighbors(AgentIndex i) const { return adjacency_.at(i); }

    /// BFS ball of radius k around the agent, including the agent itself;
    /// sorted ascending. k = 0 gives {agent}.
    std::vector<AgentIndex> k_hop(AgentIndex agent, std::uint32_t k) const;

    /// Max over agent pairs of the hop distance. Throws std::domain_error on
    /// a disconnected graph.
    std::uint32_t diameter() const;

  private:
    std::vector<std::pair<AgentIndex, AgentIndex>> edges_;
    std::vector<std::vector<AgentIndex>> adjacency_;
};

/// Per-agent transition factor: the agent's next local state depends on the
/// local states of its graph neighborhood (itself plus adjacent agents) and
/// its own action.
struct AgentFactor {
    std::vector<AgentIndex> scope;  // sorted; includes the agent itself
    IndexSpace scope_states;
    std::uint32_t action_count = 0;
    // rows[scope_state * action_count + a_i] -> distribution over own next state
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;

    const std::vector<std::pair<std::uint32_t, double>>& row(std::uint32_t scope_state,
                                                             std::uint32_t action) const {
        return rows.at(std::size_t(scope_state) * action_count + action);
    }
};

/// Factored model: the joint transition of a safe state is the product of
/// per-agent factors; unsafe states absorb (self-loop under every action),
/// overriding the product form there. The expanded joint model is kept for
/// exact pipelines.
struct FactoredMmdp {
    Mmdp joint;
    InteractionGraph graph;
    std::vector<AgentFactor> factors;
};

/// Builds a FactoredMmdp from per-agent data and factor rows, expanding the
/// joint sparse transition table.
class FactoredMmdpBuilder {
  public:
    FactoredMmdpBuilder& agents(std::vector<std::string> names);
    FactoredMmdpBuilder& state_labels(AgentIndex i, std::vector<std::string> labels);
    FactoredMmdpBuilder& action_labels(AgentIndex i, std::vector<std::string> labels);
    FactoredMmdpBuilder& admissible(AgentIndex i, std::uint32_t state,
                                    std::vector<std::uint32_t> allow);
    FactoredMmdpBuilder& graph(InteractionGraph g);
    FactoredMmdpBuilder& unsafe(UnsafeSpec spec);

    /// Factor row for agent i: distribution of its next state given the
    /// local states of its scope ({i} plus neighbors, sorted) and its action.
    FactoredMmdpBuilder& factor(AgentIndex i, std::span<const std::uint32_t> scope_states,
                                std::uint32_t action,
                                std::vector<std::pair<std::uint32_t, double>> dist);

    FactoredMmdp finish();

  private:
    std::vector<std::string> agents_;
    std::vector<std::vector<std::string>> state_labels_;
    std::vector<std::vector<std::string>> action_labels_;
    std::vector<std::tuple<AgentIndex, std::uint32_t, std::vector<std::uint32_t>>> admissible_;
    InteractionGraph graph_;
    bool graph_set_ = false;
    UnsafeSpec unsafe_;
    std::vector<AgentFactor> factors_;
    bool factors_ready_ = false;
    void ensure_factor_tables();
};

/// The slice of the joint model visible to one agent at radius k.
struct LocalBlock {
    AgentIndex agent = 0;
    std::uint32_t radius = 0;
    std::vector<AgentIndex> ball;     // sorted, includes agent
    std::vector<AgentIndex> outside;  // sorted complement
    CoalitionMask ball_mask = 0;
    IndexSpace ball_states;
    IndexSpace ball_actions;
    IndexSpace out_states;

    std::uint32_t project_state(std::span<const std::uint32_t> full_digits) const;
    std::uint32_t project_action(std::span<const std::uint32_t> full_digits) const;
};

LocalBlock make_local_block(const FactoredMmdp& f, AgentIndex agent, std::uint32_t k);

/// Inputs handed to a weight function: the full joint configuration split
/// into ball and outside agents, plus the number of admissible completions
/// of the current ball configuration.
struct WeightContext {
    AgentIndex agent;
    std::uint32_t radius;
    std::span<const AgentIndex> ball;
    std::span<const AgentIndex> outside;
    std::span<const std::uint32_t> state_digits;   // per-agent local states, all agents
    std::span<const std::uint32_t> action_digits;  // per-agent local actions, all agents
    std::size_t completion_count;
};

/// Non-negative weights over out-of-ball completions; must sum to 1 for every
/// ball configuration (checked to 1e-9).
struct WeightScheme {
    std::function<double(const WeightContext&)> weight;

    static WeightScheme uniform();
    /// All mass on the completion matching the reference joint configuration.
    static WeightScheme concentrated(std::vector<std::uint32_t> state_digits,
                                     std::vector<std::uint32_t> action_digits);
};

/// Marginalized transition kernel on a ball block: rows are weighted averages
/// over completions of the exact block marginals of the joint transition.
struct LocalTransition {
    LocalBlock block;
    // rows[x * |B| + b] -> distribution over next ball states, sorted
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
};

LocalTransition marginalize_transitions(const FactoredMmdp& f, AgentIndex agent, std::uint32_t k,
                                        const WeightScheme& w);

/// Local reachability table on a ball block. Stage 0 is the weighted average
/// of the exact unsafe indicator over completions; later stages follow the
/// minimizing recursion under the marginalized kernel.
class LocalQTable {
  public:
    LocalQTable() = default;
    LocalQTable(LocalBlock block, std::uint32_t horizon);

    const LocalBlock& block() const { return block_; }
    std::uint32_t horizon() const { return horizon_; }
    bool certified() const { return certified_; }
    void set_certified(bool c) { certified_ = c; }

    double at(std::uint32_t ball_state, std::uint32_t ball_action, std::uint32_t t) const;
    double min_value(std::uint32_t ball_state, std::uint32_t t) const;

    double* stage(std::uint32_t t) { return values_.data() + std::size_t(t) * stride_; }
    const double* stage(std::uint32_t t) const {
        return values_.data() + std::size_t(t) * stride_;
    }
    double* mins(std::uint32_t t) { return mins_.data() + std::size_t(t) * n_states_; }
    const double* mins(std::uint32_t t) const {
        return mins_.data() + std::size_t(t) * n_states_;
    }

    std::uint64_t cell_count() const { return values_.size(); }

  private:
    LocalBlock block_;
    std::uint32_t horizon_ = 0;
    std::uint64_t n_states_ = 0;
    std::uint64_t n_actions_ = 0;
    std::size_t stride_ = 0;
    bool certified_ = false;
    std::vector<double> values_;
    std::vector<double> mins_;
};

LocalQTable local_q(const FactoredMmdp& f, AgentIndex agent, std::uint32_t k,
                    const WeightScheme& w, std::uint32_t horizon, bool certified = false);

/// Exponential-decay envelope fitted to the observed sensitivity of the
/// stage-0 reachability values to out-of-ball configurations.
struct DecayCertificate {
    double c = 0.0;
    double gamma = 0.0;
    std::uint32_t k_max = 0;
    std::vector<double> worst_deviation;  // per k = 0..k_max
    bool certified = false;

    double envelope(std::uint32_t k) const;
    /// Whether a given (c', gamma') envelope bounds every checked deviation.
    bool holds_for(double c_check, double gamma_check) const;
};

struct DecayOptions {
    std::uint64_t config_budget = 50'000'000;
};

/// Exact sup deviation of stage-0 values over out-of-ball configurations for
/// every agent and radius k <= k_max, then the smallest-envelope (c, gamma)
/// fit over a gamma grid of 0.1..0.9.
DecayCertificate certify_decay(const FactoredMmdp& f, std::uint32_t k_max,
                               const DecayOptions& opts = {});

/// Full attribution pipeline with per-agent local tables in place of the
/// exact reachability table. The report carries the certificate-derived
/// error bound on each phi, or is flagged uncertified when no certificate is
/// available. Local values stay monotone over coalitions, so phi stays
/// non-positive.
DorReport local_dor(const FactoredMmdp& f, const Trajectory& tr, std::uint32_t k,
                    const WeightScheme& w,
                    const std::optional<DecayCertificate>& certificate = std::nullopt,
                    std::string scenario_name = "");

}  // namespace dor
