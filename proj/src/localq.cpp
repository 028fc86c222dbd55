#include "dor/localq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

namespace dor {

InteractionGraph::InteractionGraph(std::size_t n_agents,
                                   std::vector<std::pair<AgentIndex, AgentIndex>> edges)
    : edges_(std::move(edges)), adjacency_(n_agents) {
    for (auto& [a, b] : edges_) {
        if (a >= n_agents || b >= n_agents)
            throw std::out_of_range("InteractionGraph: edge endpoint out of range");
        if (a == b) throw std::invalid_argument("InteractionGraph: self-loop edge");
        adjacency_[a].push_back(b);
        adjacency_[b].push_back(a);
    }
    for (auto& adj : adjacency_) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
}

std::vector<AgentIndex> InteractionGraph::k_hop(AgentIndex agent, std::uint32_t k) const {
    if (agent >= adjacency_.size()) throw std::domain_error("k_hop: unknown agent");
    std::vector<std::uint32_t> dist(adjacency_.size(), UINT32_MAX);
    std::deque<AgentIndex> queue{agent};
    dist[agent] = 0;
    while (!queue.empty()) {
        AgentIndex v = queue.front();
        queue.pop_front();
        if (dist[v] == k) continue;
        for (AgentIndex w : adjacency_[v]) {
            if (dist[w] != UINT32_MAX) continue;
            dist[w] = dist[v] + 1;
            queue.push_back(w);
        }
    }
    std::vector<AgentIndex> ball;
    for (AgentIndex v = 0; v < adjacency_.size(); ++v)
        if (dist[v] <= k) ball.push_back(v);
    return ball;
}

std::uint32_t InteractionGraph::diameter() const {
    std::uint32_t best = 0;
    for (AgentIndex src = 0; src < adjacency_.size(); ++src) {
        std::vector<std::uint32_t> dist(adjacency_.size(), UINT32_MAX);
        std::deque<AgentIndex> queue{src};
        dist[src] = 0;
        while (!queue.empty()) {
            AgentIndex v = queue.front();
            queue.pop_front();
            for (AgentIndex w : adjacency_[v]) {
                if (dist[w] != UINT32_MAX) continue;
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
        for (std::uint32_t d : dist) {
            if (d == UINT32_MAX) throw std::domain_error("diameter: graph is not connected");
            best = std::max(best, d);
        }
    }
    return best;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::agents(std::vector<std::string> names) {
    agents_ = std::move(names);
    state_labels_.resize(agents_.size());
    action_labels_.resize(agents_.size());
    return *this;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::state_labels(AgentIndex i,
                                                       std::vector<std::string> labels) {
    state_labels_.at(i) = std::move(labels);
    factors_ready_ = false;
    return *this;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::action_labels(AgentIndex i,
                                                        std::vector<std::string> labels) {
    action_labels_.at(i) = std::move(labels);
    factors_ready_ = false;
    return *this;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::admissible(AgentIndex i, std::uint32_t state,
                                                     std::vector<std::uint32_t> allow) {
    admissible_.emplace_back(i, state, std::move(allow));
    return *this;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::graph(InteractionGraph g) {
    graph_ = std::move(g);
    graph_set_ = true;
    factors_ready_ = false;
    return *this;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::unsafe(UnsafeSpec spec) {
    unsafe_ = std::move(spec);
    return *this;
}

void FactoredMmdpBuilder::ensure_factor_tables() {
    if (factors_ready_) return;
    if (!graph_set_) graph_ = InteractionGraph(agents_.size(), {});
    if (graph_.agent_count() != agents_.size())
        throw std::invalid_argument("FactoredMmdpBuilder: graph size mismatch");
    factors_.assign(agents_.size(), {});
    for (AgentIndex i = 0; i < agents_.size(); ++i) {
        AgentFactor& f = factors_[i];
        f.scope = graph_.neighbors(i);
        f.scope.push_back(i);
        std::sort(f.scope.begin(), f.scope.end());
        std::vector<std::uint32_t> sizes;
        for (AgentIndex j : f.scope)
            sizes.push_back(static_cast<std::uint32_t>(state_labels_.at(j).size()));
        f.scope_states = IndexSpace(sizes);
        f.action_count = static_cast<std::uint32_t>(action_labels_.at(i).size());
        f.rows.assign(f.scope_states.size() * f.action_count, {});
    }
    factors_ready_ = true;
}

FactoredMmdpBuilder& FactoredMmdpBuilder::factor(
    AgentIndex i, std::span<const std::uint32_t> scope_states, std::uint32_t action,
    std::vector<std::pair<std::uint32_t, double>> dist) {
    ensure_factor_tables();
    AgentFactor& f = factors_.at(i);
    std::uint32_t scope_idx = f.scope_states.encode(scope_states);
    if (action >= f.action_count) throw std::out_of_range("factor: action out of range");
    double sum = 0.0;
    for (auto& [s2, p] : dist) {
        if (s2 >= state_labels_.at(i).size())
            throw std::out_of_range("factor: successor out of range");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance)
        throw invariant_error("factor: distribution sums to " + std::to_string(sum));
    std::sort(dist.begin(), dist.end());
    f.rows.at(std::size_t(scope_idx) * f.action_count + action) = std::move(dist);
    return *this;
}

FactoredMmdp FactoredMmdpBuilder::finish() {
    ensure_factor_tables();
    MmdpBuilder mb;
    mb.agents(agents_);
    for (AgentIndex i = 0; i < agents_.size(); ++i) {
        mb.state_labels(i, state_labels_[i]);
        mb.action_labels(i, action_labels_[i]);
    }
    for (auto& [i, state, allow] : admissible_) mb.admissible(i, state, allow);
    mb.unsafe(unsafe_);

    // Interim model used for unsafety and admissibility during expansion.
    MmdpBuilder probe_builder;
    probe_builder.agents(agents_);
    for (AgentIndex i = 0; i < agents_.size(); ++i) {
        probe_builder.state_labels(i, state_labels_[i]);
        probe_builder.action_labels(i, action_labels_[i]);
    }
    for (auto& [i, state, allow] : admissible_) probe_builder.admissible(i, state, allow);
    probe_builder.unsafe(unsafe_);
    Mmdp probe = probe_builder.finish();

    const IndexSpace& states = probe.states();
    const IndexSpace& actions = probe.actions();
    const std::size_t n = agents_.size();

    std::vector<std::uint32_t> sdig(n), adig(n), scope_dig;
    for (JointState s = 0; s < states.size(); ++s) {
        states.decode(s, sdig);
        const bool unsafe_s = probe.is_unsafe(s);
        for (JointAction a : probe.admissible_actions(s)) {
            if (unsafe_s) {
                // Unsafe states absorb under every action; this overrides the
                // factored product there (collided agents stay put).
                mb.transition(s, a, s, 1.0);
                continue;
            }
            actions.decode(a, adig);
            std::vector<const std::vector<std::pair<std::uint32_t, double>>*> rows(n);
            for (AgentIndex i = 0; i < n; ++i) {
                const AgentFactor& f = factors_[i];
                scope_dig.clear();
                for (AgentIndex j : f.scope) scope_dig.push_back(sdig[j]);
                rows[i] = &f.row(f.scope_states.encode(scope_dig), adig[i]);
                if (rows[i]->empty())
                    throw invariant_error(
                        "FactoredMmdp: missing factor row for an admissible action");
            }
            // product expansion over the per-agent supports
            std::vector<std::size_t> pos(n, 0);
            std::vector<std::uint32_t> succ(n);
            bool done = false;
            while (!done) {
                double p = 1.0;
                for (AgentIndex i = 0; i < n; ++i) {
                    succ[i] = (*rows[i])[pos[i]].first;
                    p *= (*rows[i])[pos[i]].second;
                }
                if (p > 0.0) mb.transition(s, a, states.encode(succ), p);
                std::size_t i = n;
                for (;;) {
                    if (i == 0) {
                        done = true;
                        break;
                    }
                    --i;
                    if (++pos[i] < rows[i]->size()) break;
                    pos[i] = 0;
                }
            }
        }
    }

    FactoredMmdp out;
    out.joint = mb.finish();
    out.graph = std::move(graph_);
    out.factors = std::move(factors_);
    return out;
}

std::uint32_t LocalBlock::project_state(std::span<const std::uint32_t> full_digits) const {
    std::vector<std::uint32_t> d(ball.size());
    for (std::size_t j = 0; j < ball.size(); ++j) d[j] = full_digits[ball[j]];
    return ball_states.encode(d);
}

std::uint32_t LocalBlock::project_action(std::span<const std::uint32_t> full_digits) const {
    std::vector<std::uint32_t> d(ball.size());
    for (std::size_t j = 0; j < ball.size(); ++j) d[j] = full_digits[ball[j]];
    return ball_actions.encode(d);
}

LocalBlock make_local_block(const FactoredMmdp& f, AgentIndex agent, std::uint32_t k) {
    LocalBlock blk;
    blk.agent = agent;
    blk.radius = k;
    blk.ball = f.graph.k_hop(agent, k);
    const std::size_t n = f.joint.agent_count();
    std::vector<char> in_ball(n, 0);
    for (AgentIndex j : blk.ball) {
        in_ball[j] = 1;
        blk.ball_mask |= CoalitionMask(1) << j;
    }
    for (AgentIndex j = 0; j < n; ++j)
        if (!in_ball[j]) blk.outside.push_back(j);

    std::vector<std::uint32_t> bs, ba, os;
    for (AgentIndex j : blk.ball) {
        bs.push_back(f.joint.states().component_size(j));
        ba.push_back(f.joint.actions().component_size(j));
    }
    for (AgentIndex j : blk.outside) os.push_back(f.joint.states().component_size(j));
    blk.ball_states = IndexSpace(bs);
    blk.ball_actions = IndexSpace(ba);
    blk.out_states = IndexSpace(os);
    return blk;
}

WeightScheme WeightScheme::uniform() {
    WeightScheme w;
    w.weight = [](const WeightContext& ctx) { return 1.0 / double(ctx.completion_count); };
    return w;
}

WeightScheme WeightScheme::concentrated(std::vector<std::uint32_t> state_digits,
                                        std::vector<std::uint32_t> action_digits) {
    WeightScheme w;
    w.weight = [s = std::move(state_digits),
                a = std::move(action_digits)](const WeightContext& ctx) {
        for (AgentIndex j : ctx.outside)
            if (ctx.state_digits[j] != s.at(j) || ctx.action_digits[j] != a.at(j)) return 0.0;
        return 1.0;
    };
    return w;
}

namespace {

// Odometer over the product of per-agent admissible action sets for the
// listed members; writes each combination into adig and invokes fn.
template <typename Fn>
void for_each_member_action(const Mmdp& m, std::span<const AgentIndex> members,
                            std::span<const std::uint32_t> sdig, std::vector<std::uint32_t>& adig,
                            Fn&& fn) {
    if (members.empty()) {
        fn();
        return;
    }
    std::vector<const std::vector<std::uint32_t>*> sets(members.size());
    for (std::size_t j = 0; j < members.size(); ++j)
        sets[j] = &m.admissible_local(members[j], sdig[members[j]]);
    std::vector<std::size_t> pos(members.size(), 0);
    bool done = false;
    while (!done) {
        for (std::size_t j = 0; j < members.size(); ++j) adig[members[j]] = (*sets[j])[pos[j]];
        fn();
        std::size_t j = members.size();
        for (;;) {
            if (j == 0) {
                done = true;
                break;
            }
            --j;
            if (++pos[j] < sets[j]->size()) break;
            pos[j] = 0;
        }
    }
}

// All admissible completions of the out-of-ball agents: every out-of-ball
// state configuration combined with every admissible assignment of their
// actions. Ball positions of sdig/adig must be prefilled and are preserved.
template <typename Fn>
void for_each_completion(const Mmdp& m, const LocalBlock& blk, std::vector<std::uint32_t>& sdig,
                         std::vector<std::uint32_t>& adig, Fn&& fn) {
    if (blk.outside.empty()) {
        fn();
        return;
    }
    std::vector<std::uint32_t> zdig(blk.outside.size());
    for (std::uint32_t z = 0; z < blk.out_states.size(); ++z) {
        blk.out_states.decode(z, zdig);
        for (std::size_t j = 0; j < blk.outside.size(); ++j) sdig[blk.outside[j]] = zdig[j];
        for_each_member_action(m, blk.outside, sdig, adig, fn);
    }
}

}  // namespace

LocalTransition marginalize_transitions(const FactoredMmdp& f, AgentIndex agent, std::uint32_t k,
                                        const WeightScheme& w) {
    const Mmdp& m = f.joint;
    LocalBlock blk = make_local_block(f, agent, k);
    const std::uint64_t n_ball_states = blk.ball_states.size();
    const std::uint64_t n_ball_actions = blk.ball_actions.size();
    LocalTransition lt;
    lt.block = blk;
    lt.rows.assign(n_ball_states * n_ball_actions, {});

    const std::size_t n = m.agent_count();
    std::vector<std::uint32_t> sdig(n), adig(n), xdig(blk.ball.size()), bdig(blk.ball.size()),
        s2dig(n), ydig(blk.ball.size());
    std::vector<double> accum(n_ball_states, 0.0);

    for (std::uint32_t x = 0; x < n_ball_states; ++x) {
        blk.ball_states.decode(x, xdig);
        for (std::size_t j = 0; j < blk.ball.size(); ++j) sdig[blk.ball[j]] = xdig[j];
        for_each_member_action(m, blk.ball, sdig, adig, [&] {
            for (std::size_t j = 0; j < blk.ball.size(); ++j) bdig[j] = adig[blk.ball[j]];
            const std::uint32_t b = blk.ball_actions.encode(bdig);

            std::size_t count = 0;
            for_each_completion(m, blk, sdig, adig, [&] { ++count; });
            std::fill(accum.begin(), accum.end(), 0.0);
            double wsum = 0.0;
            for_each_completion(m, blk, sdig, adig, [&] {
                double wgt = 1.0;
                if (!blk.outside.empty()) {
                    WeightContext ctx{agent, k,    blk.ball, blk.outside,
                                      sdig,  adig, count};
                    wgt = w.weight(ctx);
                }
                if (wgt < 0.0)
                    throw invariant_error("marginalize_transitions: negative weight");
                wsum += wgt;
                if (wgt == 0.0) return;
                JointState s = m.states().encode(sdig);
                JointAction a = m.actions().encode(adig);
                for (const auto& [s2, p] : m.successors(s, a)) {
                    m.states().decode(s2, s2dig);
                    for (std::size_t j = 0; j < blk.ball.size(); ++j) ydig[j] = s2dig[blk.ball[j]];
                    accum[blk.ball_states.encode(ydig)] += wgt * p;
                }
            });
            if (std::abs(wsum - 1.0) > kProbTolerance)
                throw invariant_error("marginalize_transitions: weights sum to " +
                                      std::to_string(wsum));
            auto& row = lt.rows[std::size_t(x) * n_ball_actions + b];
            double row_sum = 0.0;
            for (std::uint32_t y = 0; y < n_ball_states; ++y) {
                if (accum[y] != 0.0) {
                    row.emplace_back(y, accum[y]);
                    row_sum += accum[y];
                }
            }
            if (std::abs(row_sum - 1.0) > kProbTolerance)
                throw invariant_error("marginalize_transitions: row sums to " +
                                      std::to_string(row_sum));
        });
    }
    return lt;
}

LocalQTable::LocalQTable(LocalBlock block, std::uint32_t horizon)
    : block_(std::move(block)),
      horizon_(horizon),
      n_states_(block_.ball_states.size()),
      n_actions_(block_.ball_actions.size()),
      stride_(static_cast<std::size_t>(n_states_ * n_actions_)) {
    values_.assign(std::size_t(horizon + 1) * stride_,
                   std::numeric_limits<double>::quiet_NaN());
    mins_.assign(std::size_t(horizon + 1) * n_states_,
                 std::numeric_limits<double>::quiet_NaN());
}

double LocalQTable::at(std::uint32_t ball_state, std::uint32_t ball_action,
                       std::uint32_t t) const {
    if (t > horizon_) throw std::out_of_range("LocalQTable::at: stage beyond horizon");
    if (ball_state >= n_states_ || ball_action >= n_actions_)
        throw std::out_of_range("LocalQTable::at: index out of range");
    double v = values_[std::size_t(t) * stride_ + std::size_t(ball_state) * n_actions_ +
                       ball_action];
    if (std::isnan(v)) throw std::domain_error("LocalQTable::at: inadmissible action");
    return v;
}

double LocalQTable::min_value(std::uint32_t ball_state, std::uint32_t t) const {
    if (t > horizon_) throw std::out_of_range("LocalQTable::min_value: stage beyond horizon");
    return mins_[std::size_t(t) * n_states_ + ball_state];
}

LocalQTable local_q(const FactoredMmdp& f, AgentIndex agent, std::uint32_t k,
                    const WeightScheme& w, std::uint32_t horizon, bool certified) {
    const Mmdp& m = f.joint;
    LocalTransition lt = marginalize_transitions(f, agent, k, w);
    const LocalBlock& blk = lt.block;
    LocalQTable q(blk, horizon);
    q.set_certified(certified);
    const std::uint64_t n_ball_states = blk.ball_states.size();
    const std::uint64_t n_ball_actions = blk.ball_actions.size();

    const std::size_t n = m.agent_count();
    std::vector<std::uint32_t> sdig(n), adig(n), xdig(blk.ball.size()), bdig(blk.ball.size());
    std::vector<std::vector<std::uint32_t>> admissible_combos(n_ball_states);

    double* q0 = q.stage(0);
    double* v0 = q.mins(0);
    for (std::uint32_t x = 0; x < n_ball_states; ++x) {
        blk.ball_states.decode(x, xdig);
        for (std::size_t j = 0; j < blk.ball.size(); ++j) sdig[blk.ball[j]] = xdig[j];
        double best = std::numeric_limits<double>::infinity();
        for_each_member_action(m, blk.ball, sdig, adig, [&] {
            for (std::size_t j = 0; j < blk.ball.size(); ++j) bdig[j] = adig[blk.ball[j]];
            const std::uint32_t b = blk.ball_actions.encode(bdig);
            admissible_combos[x].push_back(b);

            std::size_t count = 0;
            for_each_completion(m, blk, sdig, adig, [&] { ++count; });
            double val = 0.0, wsum = 0.0;
            for_each_completion(m, blk, sdig, adig, [&] {
                double wgt = 1.0;
                if (!blk.outside.empty()) {
                    WeightContext ctx{agent, k,    blk.ball, blk.outside,
                                      sdig,  adig, count};
                    wgt = w.weight(ctx);
                }
                if (wgt < 0.0) throw invariant_error("local_q: negative weight");
                wsum += wgt;
                if (wgt == 0.0) return;
                if (m.is_unsafe(m.states().encode(sdig))) val += wgt;
            });
            if (std::abs(wsum - 1.0) > kProbTolerance)
                throw invariant_error("local_q: weights sum to " + std::to_string(wsum));
            q0[std::size_t(x) * n_ball_actions + b] = val;
            best = std::min(best, val);
        });
        v0[x] = best;
    }

    for (std::uint32_t t = 1; t <= horizon; ++t) {
        double* qt = q.stage(t);
        double* vt = q.mins(t);
        const double* mins_prev = q.mins(t - 1);
        for (std::uint32_t x = 0; x < n_ball_states; ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (std::uint32_t b : admissible_combos[x]) {
                double sum = 0.0;
                for (const auto& [y, p] : lt.rows[std::size_t(x) * n_ball_actions + b])
                    sum += p * mins_prev[y];
                qt[std::size_t(x) * n_ball_actions + b] = sum;
                best = std::min(best, sum);
            }
            vt[x] = best;
        }
    }
    return q;
}

double DecayCertificate::envelope(std::uint32_t k) const {
    return c * std::pow(gamma, double(k) + 1.0);
}

bool DecayCertificate::holds_for(double c_check, double gamma_check) const {
    for (std::uint32_t k = 0; k < worst_deviation.size(); ++k)
        if (worst_deviation[k] > c_check * std::pow(gamma_check, double(k) + 1.0) + 1e-12)
            return false;
    return true;
}

DecayCertificate certify_decay(const FactoredMmdp& f, std::uint32_t k_max,
                               const DecayOptions& opts) {
    const Mmdp& m = f.joint;
    const std::uint64_t n_states = m.states().size();
    const std::size_t n = m.agent_count();
    const std::uint64_t work = n_states * (std::uint64_t(k_max) + 1) * n;
    if (work > opts.config_budget)
        throw guard_error("certify_decay: " + std::to_string(work) +
                          " configurations exceed budget of " +
                          std::to_string(opts.config_budget));

    std::vector<char> unsafe(n_states, 0);
    for (JointState s = 0; s < n_states; ++s) unsafe[s] = m.is_unsafe(s) ? 1 : 0;

    DecayCertificate cert;
    cert.k_max = k_max;
    cert.worst_deviation.assign(k_max + 1, 0.0);

    std::vector<std::uint32_t> sdig(n);
    for (std::uint32_t k = 0; k <= k_max; ++k) {
        double worst = 0.0;
        for (AgentIndex i = 0; i < n && worst < 1.0; ++i) {
            LocalBlock blk = make_local_block(f, i, k);
            if (blk.outside.empty()) continue;
            const std::uint64_t n_ball = blk.ball_states.size();
            // stage-0 values are the unsafe indicator, independent of actions,
            // so the sup ranges over state completions only
            std::vector<char> lo(n_ball, 1), hi(n_ball, 0);
            std::vector<std::uint32_t> xdig(blk.ball.size());
            for (JointState s = 0; s < n_states; ++s) {
                m.states().decode(s, sdig);
                for (std::size_t j = 0; j < blk.ball.size(); ++j) xdig[j] = sdig[blk.ball[j]];
                std::uint32_t x = blk.ball_states.encode(xdig);
                lo[x] = std::min(lo[x], unsafe[s]);
                hi[x] = std::max(hi[x], unsafe[s]);
            }
            for (std::uint32_t x = 0; x < n_ball; ++x)
                worst = std::max(worst, double(hi[x] - lo[x]));
        }
        cert.worst_deviation[k] = worst;
    }

    // Envelope fit: gamma grid, c covering every deviation, smallest envelope
    // value at k_max wins.
    double best_score = std::numeric_limits<double>::infinity();
    for (int g = 1; g <= 9; ++g) {
        const double gamma = double(g) / 10.0;
        double c = cert.worst_deviation[0];
        for (std::uint32_t k = 0; k <= k_max; ++k)
            c = std::max(c, cert.worst_deviation[k] / std::pow(gamma, double(k) + 1.0));
        const double score = c * std::pow(gamma, double(k_max) + 1.0);
        if (score < best_score) {
            best_score = score;
            cert.c = c;
            cert.gamma = gamma;
        }
    }
    cert.certified = cert.holds_for(cert.c, cert.gamma);
    return cert;
}

DorReport local_dor(const FactoredMmdp& f, const Trajectory& tr, std::uint32_t k,
                    const WeightScheme& w, const std::optional<DecayCertificate>& certificate,
                    std::string scenario_name) {
    const Mmdp& m = f.joint;
    const std::size_t n = m.agent_count();
    if (n > kMaxShapleyAgents)
        throw guard_error("local_dor: exact enumeration limited to " +
                          std::to_string(kMaxShapleyAgents) + " agents");
    if (tr.states.empty()) throw std::domain_error("local_dor: empty trajectory");
    const auto horizon = static_cast<std::uint32_t>(tr.states.size());
    const bool have_cert = certificate.has_value() && certificate->certified;

    std::vector<LocalQTable> tables;
    tables.reserve(n);
    for (AgentIndex i = 0; i < n; ++i) tables.push_back(local_q(f, i, k, w, horizon, have_cert));

    std::vector<std::vector<std::uint32_t>> traj_states(tr.states.size());
    std::vector<std::vector<std::uint32_t>> traj_actions(tr.actions.size());
    for (std::size_t t = 0; t < tr.states.size(); ++t)
        traj_states[t] = m.states().decode(tr.states[t]);
    for (std::size_t t = 0; t < tr.actions.size(); ++t)
        traj_actions[t] = m.actions().decode(tr.actions[t]);

    const double terminal = m.is_unsafe(tr.states.back()) ? 1.0 : 0.0;

    // u evaluated through agent i's local table; substitutions outside the
    // ball are invisible to it, so results are memoized on Y intersected
    // with the ball.
    std::vector<std::unordered_map<CoalitionMask, double>> memo(n);
    auto local_utility = [&](AgentIndex i, CoalitionMask coalition) -> double {
        const LocalBlock& blk = tables[i].block();
        const CoalitionMask key = coalition & blk.ball_mask;
        auto it = memo[i].find(key);
        if (it != memo[i].end()) return it->second;

        std::vector<AgentIndex> members;
        for (AgentIndex j : blk.ball)
            if (key & (CoalitionMask(1) << j)) members.push_back(j);

        std::vector<std::uint32_t> adig, bdig(blk.ball.size());
        double total = 0.0;
        for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t) {
            const std::uint32_t x = blk.project_state(traj_states[t]);
            adig = traj_actions[t];
            double best = std::numeric_limits<double>::infinity();
            for_each_member_action(m, members, traj_states[t], adig, [&] {
                for (std::size_t j = 0; j < blk.ball.size(); ++j) bdig[j] = adig[blk.ball[j]];
                best = std::min(best,
                                tables[i].at(x, blk.ball_actions.encode(bdig),
                                             static_cast<std::uint32_t>(tr.states.size() - t)));
            });
            total += best;
        }
        total += terminal;
        memo[i].emplace(key, total);
        return total;
    };

    std::vector<double> phi(n, 0.0);
    const CoalitionMask full = full_mask(n);
    for (AgentIndex i = 0; i < n; ++i) {
        const CoalitionMask bit = CoalitionMask(1) << i;
        const CoalitionMask rest = full & ~bit;
        CoalitionMask sub = rest;
        for (;;) {
            phi[i] += shapley_coefficient(n, std::popcount(sub)) *
                      (local_utility(i, sub | bit) - local_utility(i, sub));
            if (sub == 0) break;
            sub = (sub - 1) & rest;
        }
    }

    std::optional<double> bound;
    if (have_cert) {
        // twice the certificate constant spread over the order-averaging
        // weights of all coalitions excluding one agent
        double c_total = 0.0;
        const CoalitionMask rest = full & ~CoalitionMask(1);
        CoalitionMask sub = rest;
        for (;;) {
            c_total += shapley_coefficient(n, std::popcount(sub)) * certificate->c;
            if (sub == 0) break;
            sub = (sub - 1) & rest;
        }
        bound = 2.0 * c_total * std::pow(certificate->gamma, double(k) + 1.0);
    }

    std::vector<double> psi = dor_from_shapley(phi);
    CoalitionMask support = 0;
    for (AgentIndex i = 0; i < n; ++i)
        if (psi[i] > 0.0) support |= CoalitionMask(1) << i;

    return make_dor_report(std::move(scenario_name), m.agents(), std::move(phi), support, {},
                           bound, !have_cert);
}

}  // namespace dor
