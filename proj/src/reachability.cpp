#include "dor/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <unordered_map>

namespace dor {

QTable::QTable(std::uint32_t horizon, std::uint64_t n_states, std::uint64_t n_actions)
    : horizon_(horizon),
      n_states_(n_states),
      n_actions_(n_actions),
      stage_stride_(static_cast<std::size_t>(n_states * n_actions)) {
    values_.assign(std::size_t(horizon + 1) * stage_stride_,
                   std::numeric_limits<double>::quiet_NaN());
    mins_.assign(std::size_t(horizon + 1) * n_states_, std::numeric_limits<double>::quiet_NaN());
}

double QTable::at(JointState s, JointAction a, std::uint32_t t) const {
    if (t > horizon_) throw std::out_of_range("QTable::at: stage beyond horizon");
    if (s >= n_states_ || a >= n_actions_) throw std::out_of_range("QTable::at: index out of range");
    double v = values_[std::size_t(t) * stage_stride_ + std::size_t(s) * n_actions_ + a];
    if (std::isnan(v)) throw std::domain_error("QTable::at: inadmissible state-action pair");
    return v;
}

double QTable::min_value(JointState s, std::uint32_t t) const {
    if (t > horizon_) throw std::out_of_range("QTable::min_value: stage beyond horizon");
    if (s >= n_states_) throw std::out_of_range("QTable::min_value: state out of range");
    return mins_[std::size_t(t) * n_states_ + s];
}

namespace {

// Precomputed admissible joint actions per state; shared by the DP stages.
struct AdmissibleTable {
    std::vector<std::vector<JointAction>> per_state;

    explicit AdmissibleTable(const Mmdp& m) {
        per_state.resize(m.states().size());
        for (JointState s = 0; s < m.states().size(); ++s)
            per_state[s] = m.admissible_actions(s);
    }
};

template <typename Fn>
void for_each_state(std::uint64_t n_states, std::uint64_t parallel_threshold, Fn&& fn) {
    if (n_states < parallel_threshold) {
        for (JointState s = 0; s < n_states; ++s) fn(s);
        return;
    }
    unsigned hw = std::thread::hardware_concurrency();
    unsigned workers = std::clamp(hw, 2u, 8u);
    std::vector<std::thread> pool;
    std::uint64_t chunk = (n_states + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::uint64_t lo = w * chunk;
        std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, n_states);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (JointState s = static_cast<JointState>(lo); s < hi; ++s) fn(s);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

QTable compute_q(const Mmdp& m, std::uint32_t horizon, const QOptions& opts) {
    const std::uint64_t n_states = m.states().size();
    const std::uint64_t n_actions = m.actions().size();
    const std::uint64_t cells = std::uint64_t(horizon + 1) * n_states * n_actions;
    if (cells > opts.cell_budget)
        throw guard_error("compute_q: table of " + std::to_string(cells) +
                          " cells exceeds budget of " + std::to_string(opts.cell_budget));

    QTable q(horizon, n_states, n_actions);
    AdmissibleTable adm(m);

    std::vector<char> unsafe(n_states, 0);
    for (JointState s = 0; s < n_states; ++s) unsafe[s] = m.is_unsafe(s) ? 1 : 0;

    double* q0 = q.stage(0);
    double* v0 = q.mins(0);
    for (JointState s = 0; s < n_states; ++s) {
        double base = unsafe[s] ? 1.0 : 0.0;
        for (JointAction a : adm.per_state[s]) q0[std::size_t(s) * n_actions + a] = base;
        v0[s] = base;
    }

    for (std::uint32_t t = 1; t <= horizon; ++t) {
        double* qt = q.stage(t);
        double* vt = q.mins(t);
        const double* vprev = q.mins(t - 1);
        for_each_state(n_states, opts.parallel_threshold, [&](JointState s) {
            double best = std::numeric_limits<double>::infinity();
            for (JointAction a : adm.per_state[s]) {
                double sum = 0.0;
                for (const auto& [s2, p] : m.successors(s, a)) sum += p * vprev[s2];
                qt[std::size_t(s) * n_actions + a] = sum;
                best = std::min(best, sum);
            }
            vt[s] = adm.per_state[s].empty() ? std::numeric_limits<double>::quiet_NaN() : best;
        });
    }
    return q;
}

JointAction safe_joint_action(const Mmdp& m, const QTable& q, JointState s,
                              std::uint32_t stages_to_go) {
    if (stages_to_go < 1) throw std::domain_error("safe_joint_action: stages_to_go must be >= 1");
    auto actions = m.admissible_actions(s);
    if (actions.empty()) throw std::domain_error("safe_joint_action: no admissible action");
    JointAction best_a = actions.front();
    double best = q.at(s, best_a, stages_to_go);
    for (std::size_t i = 1; i < actions.size(); ++i) {
        double v = q.at(s, actions[i], stages_to_go);
        if (v < best) {
            best = v;
            best_a = actions[i];
        }
    }
    return best_a;
}

namespace {

void check_stage(const Trajectory& tr, std::size_t t, const char* who) {
    if (tr.states.size() < 2 || t + 2 > tr.states.size())
        throw std::domain_error(std::string(who) + ": stage must satisfy 0 <= t <= T-2");
}

void check_coalition(const Mmdp& m, CoalitionMask coalition, const char* who) {
    if (coalition & ~full_mask(m.agent_count()))
        throw std::invalid_argument(std::string(who) + ": coalition has bits beyond agent count");
}

// Enumerates admissible substitutions of the coalition members' components
// of `observed` at state s (all other components fixed), calling fn with
// each candidate joint action.
template <typename Fn>
void for_each_coalition_substitution(const Mmdp& m, JointState s, JointAction observed,
                                     CoalitionMask coalition, Fn&& fn) {
    std::vector<AgentIndex> members;
    for (AgentIndex i = 0; i < m.agent_count(); ++i)
        if (coalition & (CoalitionMask(1) << i)) members.push_back(i);

    std::vector<const std::vector<std::uint32_t>*> sets(members.size());
    for (std::size_t j = 0; j < members.size(); ++j)
        sets[j] = &m.admissible_local(members[j], m.states().digit(s, members[j]));

    std::vector<std::size_t> pos(members.size(), 0);
    for (;;) {
        JointAction cand = observed;
        for (std::size_t j = 0; j < members.size(); ++j)
            cand = m.actions().with_digit(cand, members[j], (*sets[j])[pos[j]]);
        fn(cand);
        std::size_t j = members.size();
        if (j == 0) return;
        while (j > 0) {
            --j;
            if (++pos[j] < sets[j]->size()) break;
            pos[j] = 0;
            if (j == 0) return;
        }
    }
}

}  // namespace

JointAction counterfactual_action(const Mmdp& m, const QTable& q, const Trajectory& tr,
                                  CoalitionMask coalition, std::size_t t) {
    check_stage(tr, t, "counterfactual_action");
    check_coalition(m, coalition, "counterfactual_action");
    const JointState s = tr.states[t];
    const JointAction observed = tr.actions[t];
    const auto stages = static_cast<std::uint32_t>(tr.states.size() - t);

    double best = std::numeric_limits<double>::infinity();
    JointAction best_a = 0;
    bool found = false;
    for_each_coalition_substitution(m, s, observed, coalition, [&](JointAction cand) {
        if (!m.action_admissible(s, cand)) return;
        double v = q.at(s, cand, stages);
        if (!found || v < best || (v == best && cand < best_a)) {
            best = v;
            best_a = cand;
            found = true;
        }
    });
    if (!found)
        throw std::domain_error("counterfactual_action: no admissible completion for coalition");
    return best_a;
}

double counterfactual_utility(const Mmdp& m, const QTable& q, const Trajectory& tr,
                              CoalitionMask coalition, std::size_t t) {
    JointAction a = counterfactual_action(m, q, tr, coalition, t);
    return q.at(tr.states[t], a, static_cast<std::uint32_t>(tr.states.size() - t));
}

double coalition_utility(const Mmdp& m, const QTable& q, const Trajectory& tr,
                         CoalitionMask coalition) {
    check_coalition(m, coalition, "coalition_utility");
    if (tr.states.empty()) throw std::domain_error("coalition_utility: empty trajectory");
    double total = 0.0;
    for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t)
        total += counterfactual_utility(m, q, tr, coalition, t);
    total += m.is_unsafe(tr.states.back()) ? 1.0 : 0.0;
    return total;
}

namespace {

// Depth-limited minimal reach probability, by direct recursion over the
// model. Subresults are cached per (state, depth) within one evaluation;
// no table over the full space is ever built.
struct ReachEnumerator {
    const Mmdp& m;
    std::unordered_map<std::uint64_t, double> memo;

    double state_value(JointState s, std::uint32_t depth) {
        if (depth == 0) return m.is_unsafe(s) ? 1.0 : 0.0;
        std::uint64_t key = (std::uint64_t(s) << 32) | depth;
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        double best = std::numeric_limits<double>::infinity();
        for (JointAction a : m.admissible_actions(s)) best = std::min(best, action_value(s, a, depth));
        memo.emplace(key, best);
        return best;
    }

    double action_value(JointState s, JointAction a, std::uint32_t depth) {
        if (depth == 0) return m.is_unsafe(s) ? 1.0 : 0.0;
        double sum = 0.0;
        for (const auto& [s2, p] : m.successors(s, a)) sum += p * state_value(s2, depth - 1);
        return sum;
    }
};

}  // namespace

double brute_force_utility(const Mmdp& m, const Trajectory& tr, CoalitionMask coalition,
                           std::uint64_t leaf_guard) {
    check_coalition(m, coalition, "brute_force_utility");
    if (tr.states.empty()) throw std::domain_error("brute_force_utility: empty trajectory");
    const std::uint64_t work =
        m.states().size() * m.actions().size() * std::uint64_t(tr.states.size());
    if (work > leaf_guard)
        throw guard_error("brute_force_utility: enumeration of " + std::to_string(work) +
                          " leaves exceeds guard of " + std::to_string(leaf_guard));

    ReachEnumerator reach{m, {}};
    double total = 0.0;
    for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t) {
        const JointState s = tr.states[t];
        const auto depth = static_cast<std::uint32_t>(tr.states.size() - t);
        double best = std::numeric_limits<double>::infinity();
        bool found = false;
        for_each_coalition_substitution(m, s, tr.actions[t], coalition, [&](JointAction cand) {
            if (!m.action_admissible(s, cand)) return;
            best = std::min(best, reach.action_value(s, cand, depth));
            found = true;
        });
        if (!found)
            throw std::domain_error("brute_force_utility: no admissible completion for coalition");
        total += best;
    }
    total += m.is_unsafe(tr.states.back()) ? 1.0 : 0.0;
    return total;
}

PolicySpec safe_policy(const Mmdp& m, const QTable& q) {
    PolicySpec spec;
    spec.horizon = q.horizon();
    spec.n_states = q.state_count();
    spec.actions.resize(std::size_t(q.horizon()) * q.state_count());
    for (std::uint32_t stg = 1; stg <= q.horizon(); ++stg)
        for (JointState s = 0; s < q.state_count(); ++s)
            spec.actions[std::size_t(stg - 1) * q.state_count() + s] =
                safe_joint_action(m, q, s, stg);
    return spec;
}

}  // namespace dor
