#include "random_models.hpp"

#include <algorithm>
#include <string>

namespace dor::testing {

namespace {

std::vector<std::string> shared_labels(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

// last probability absorbs the rounding slack so rows sum to 1 exactly-ish
std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> u(n);
    double total = 0.0;
    for (double& x : u) {
        x = uniform(rng, 0.1, 1.0);
        total += x;
    }
    std::vector<double> p(n);
    double partial = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        p[i] = u[i] / total;
        partial += p[i];
    }
    p[n - 1] = 1.0 - partial;
    return p;
}

std::optional<Trajectory> sample_violating_walk(std::mt19937_64& rng, const Mmdp& m,
                                                std::size_t max_states, std::size_t attempts,
                                                bool stop_at_unsafe) {
    std::vector<JointState> safe_starts;
    for (JointState s = 0; s < m.states().size(); ++s)
        if (!m.is_unsafe(s)) safe_starts.push_back(s);
    if (safe_starts.empty()) return std::nullopt;

    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        Trajectory tr;
        tr.states.push_back(pick(rng, safe_starts));
        while (tr.states.size() < max_states) {
            JointState s = tr.states.back();
            auto actions = m.admissible_actions(s);
            JointAction a = pick(rng, actions);
            const auto& row = m.successors(s, a);
            if (row.empty()) break;
            double roll = uniform(rng, 0.0, 1.0), acc = 0.0;
            JointState next = row.back().first;
            for (const auto& [s2, p] : row) {
                acc += p;
                if (roll <= acc) {
                    next = s2;
                    break;
                }
            }
            tr.actions.push_back(a);
            tr.states.push_back(next);
            if (stop_at_unsafe && m.is_unsafe(next)) break;
        }
        if (tr.states.size() >= 2 && m.is_unsafe(tr.states.back())) return tr;
    }
    return std::nullopt;
}

UnsafeSpec random_unsafe(std::mt19937_64& rng, const std::vector<std::vector<std::string>>& labels) {
    switch (pick_index(rng, 3)) {
        case 0: return UnsafeSpec::collision();
        case 1: {
            AgentIndex agent = pick_index(rng, labels.size());
            std::vector<std::string> locs;
            for (const auto& l : labels[agent])
                if (uniform(rng, 0.0, 1.0) < 0.4) locs.push_back(l);
            if (locs.empty()) locs.push_back(pick(rng, labels[agent]));
            return UnsafeSpec::forbidden(std::to_string(agent), locs);
        }
        default: {
            // random sparse set of joint label tuples
            std::vector<std::vector<std::string>> states;
            std::vector<std::size_t> idx(labels.size(), 0);
            bool done = false;
            while (!done) {
                if (uniform(rng, 0.0, 1.0) < 0.15) {
                    std::vector<std::string> tuple;
                    for (std::size_t i = 0; i < labels.size(); ++i)
                        tuple.push_back(labels[i][idx[i]]);
                    states.push_back(tuple);
                }
                std::size_t i = labels.size();
                for (;;) {
                    if (i == 0) {
                        done = true;
                        break;
                    }
                    --i;
                    if (++idx[i] < labels[i].size()) break;
                    idx[i] = 0;
                }
            }
            if (states.empty()) {
                std::vector<std::string> tuple;
                for (const auto& l : labels) tuple.push_back(l.front());
                states.push_back(tuple);
            }
            return UnsafeSpec::explicit_list(states);
        }
    }
}

}  // namespace

std::optional<RandomInstance> random_small_instance(std::mt19937_64& rng) {
    const std::size_t n = 2 + pick_index(rng, 2);  // 2..3 agents
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> state_labels(n), action_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        names.push_back(std::to_string(i));
        state_labels[i] = shared_labels(2 + pick_index(rng, 2));  // 2..3 states
        std::size_t n_actions = 1 + pick_index(rng, 2);           // 1..2 actions
        for (std::size_t a = 0; a < n_actions; ++a) action_labels[i].push_back("a" + std::to_string(a));
    }
    UnsafeSpec unsafe = random_unsafe(rng, state_labels);

    // admissibility first, via a transition-free probe of the same shape
    std::vector<std::vector<std::vector<std::uint32_t>>> admissible(n);
    for (std::size_t i = 0; i < n; ++i) {
        admissible[i].resize(state_labels[i].size());
        for (std::size_t s = 0; s < state_labels[i].size(); ++s) {
            std::vector<std::uint32_t> allow;
            for (std::uint32_t a = 0; a < action_labels[i].size(); ++a)
                if (uniform(rng, 0.0, 1.0) < 0.8) allow.push_back(a);
            if (allow.empty())
                allow.push_back(static_cast<std::uint32_t>(pick_index(rng, action_labels[i].size())));
            admissible[i][s] = allow;
        }
    }

    auto make_builder = [&] {
        MmdpBuilder b;
        b.agents(names);
        for (std::size_t i = 0; i < n; ++i) {
            b.state_labels(i, state_labels[i]);
            b.action_labels(i, action_labels[i]);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = 0; s < admissible[i].size(); ++s)
                b.admissible(i, static_cast<std::uint32_t>(s), admissible[i][s]);
        b.unsafe(unsafe);
        return b;
    };

    Mmdp probe = make_builder().finish();
    MmdpBuilder builder = make_builder();
    const std::uint64_t n_states = probe.states().size();
    for (JointState s = 0; s < n_states; ++s) {
        const bool unsafe_s = probe.is_unsafe(s);
        for (JointAction a : probe.admissible_actions(s)) {
            if (unsafe_s) {
                builder.transition(s, a, s, 1.0);
                continue;
            }
            const std::size_t support =
                uniform(rng, 0.0, 1.0) < 0.5 ? 1 : 2 + pick_index(rng, 2);  // 1, 2 or 3
            std::vector<JointState> succ;
            while (succ.size() < std::min<std::size_t>(support, n_states)) {
                JointState cand = static_cast<JointState>(pick_index(rng, n_states));
                if (std::find(succ.begin(), succ.end(), cand) == succ.end()) succ.push_back(cand);
            }
            std::vector<double> probs = random_distribution(rng, succ.size());
            for (std::size_t j = 0; j < succ.size(); ++j)
                builder.transition(s, a, succ[j], probs[j]);
        }
    }
    Mmdp model = builder.finish();

    const std::size_t max_states = 2 + pick_index(rng, 3);  // 2..4 states
    auto walk = sample_violating_walk(rng, model, max_states, 40, true);
    if (!walk) return std::nullopt;
    return RandomInstance{std::move(model), std::move(*walk)};
}

std::vector<RandomInstance> random_small_instances(std::mt19937_64& rng, std::size_t count) {
    std::vector<RandomInstance> out;
    while (out.size() < count) {
        auto inst = random_small_instance(rng);
        if (inst) out.push_back(std::move(*inst));
    }
    return out;
}

std::optional<RandomFactoredInstance> random_factored_instance(std::mt19937_64& rng,
                                                               std::size_t n_agents, bool ring,
                                                               std::size_t traj_states) {
    std::vector<std::pair<AgentIndex, AgentIndex>> edges;
    for (std::size_t i = 0; i + 1 < n_agents; ++i) edges.emplace_back(i, i + 1);
    if (ring) edges.emplace_back(n_agents - 1, 0);
    InteractionGraph graph(n_agents, edges);

    // Each agent owns a private cell and shares one gap cell per graph edge
    // with that neighbor, so collisions are possible exactly between
    // adjacent agents.
    auto gap_label = [&](AgentIndex a, AgentIndex b) {
        return "gap" + std::to_string(std::min(a, b)) + "_" + std::to_string(std::max(a, b));
    };
    std::vector<std::vector<std::string>> state_labels(n_agents);
    for (AgentIndex i = 0; i < n_agents; ++i) {
        state_labels[i].push_back("own" + std::to_string(i));
        for (AgentIndex j : graph.neighbors(i)) state_labels[i].push_back(gap_label(i, j));
    }

    FactoredMmdpBuilder fb;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_agents; ++i) names.push_back(std::to_string(i));
    fb.agents(names);
    for (std::size_t i = 0; i < n_agents; ++i) {
        fb.state_labels(i, state_labels[i]);
        fb.action_labels(i, {"a0", "a1"});
    }
    fb.graph(graph);
    fb.unsafe(UnsafeSpec::collision());

    // one or two stochastic agents; the rest get deterministic factors
    std::vector<char> stochastic(n_agents, 0);
    stochastic[pick_index(rng, n_agents)] = 1;
    if (uniform(rng, 0.0, 1.0) < 0.5) stochastic[pick_index(rng, n_agents)] = 1;

    for (AgentIndex i = 0; i < n_agents; ++i) {
        std::vector<AgentIndex> scope = graph.neighbors(i);
        scope.push_back(i);
        std::sort(scope.begin(), scope.end());
        std::vector<std::uint32_t> sizes;
        for (AgentIndex j : scope)
            sizes.push_back(static_cast<std::uint32_t>(state_labels[j].size()));
        IndexSpace scope_space(sizes);
        const auto own_states = static_cast<std::uint32_t>(state_labels[i].size());
        std::vector<std::uint32_t> dig(scope.size());
        for (std::uint32_t cfg = 0; cfg < scope_space.size(); ++cfg) {
            scope_space.decode(cfg, dig);
            for (std::uint32_t a = 0; a < 2; ++a) {
                std::vector<std::pair<std::uint32_t, double>> dist;
                if (stochastic[i]) {
                    std::uint32_t s1 = static_cast<std::uint32_t>(pick_index(rng, own_states));
                    std::uint32_t s2 = static_cast<std::uint32_t>(pick_index(rng, own_states));
                    if (s1 == s2) {
                        dist = {{s1, 1.0}};
                    } else {
                        double p = uniform(rng, 0.2, 0.8);
                        dist = {{s1, p}, {s2, 1.0 - p}};
                    }
                } else {
                    dist = {{static_cast<std::uint32_t>(pick_index(rng, own_states)), 1.0}};
                }
                fb.factor(i, dig, a, std::move(dist));
            }
        }
    }

    FactoredMmdp model = fb.finish();
    // the unsafe set absorbs, so walking past an early collision still ends
    // in a violation at the requested length
    auto walk = sample_violating_walk(rng, model.joint, traj_states, 300, false);
    if (!walk) return std::nullopt;
    if (walk->states.size() != traj_states) return std::nullopt;
    return RandomFactoredInstance{std::move(model), std::move(*walk)};
}

}  // namespace dor::testing
