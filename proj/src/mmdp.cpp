#include "dor/mmdp.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace dor {

namespace {

std::string joint_state_text(const Mmdp& m, JointState s) {
    auto digits = m.states().decode(s);
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i) os << ",";
        os << m.state_labels(i)[digits[i]];
    }
    os << ")";
    return os.str();
}

}  // namespace

bool Mmdp::is_unsafe(JointState s) const {
    if (s >= states_.size()) throw std::out_of_range("is_unsafe: state index out of range");
    switch (unsafe_.kind) {
        case UnsafeSpec::Kind::ExplicitList:
            return explicit_unsafe_.count(s) > 0;
        case UnsafeSpec::Kind::Collision: {
            // Two agents in the same location label. Quadratic in N; N is small.
            std::vector<std::uint32_t> d(agents_.size());
            states_.decode(s, d);
            for (std::size_t i = 0; i < d.size(); ++i)
                for (std::size_t j = i + 1; j < d.size(); ++j)
                    if (location_ids_[i][d[i]] == location_ids_[j][d[j]]) return true;
            return false;
        }
        case UnsafeSpec::Kind::Forbidden: {
            std::uint32_t si = states_.digit(s, forbidden_agent_index_);
            return forbidden_local_[si];
        }
    }
    return false;
}

double Mmdp::transition_prob(JointState s, JointAction a, JointState s2) const {
    if (s >= states_.size() || s2 >= states_.size())
        throw std::out_of_range("transition_prob: state index out of range");
    if (a >= actions_.size()) throw std::out_of_range("transition_prob: action index out of range");
    if (!action_admissible(s, a))
        throw std::domain_error("transition_prob: inadmissible action at state");
    auto it = transitions_.find(sa_key(s, a));
    if (it == transitions_.end()) return 0.0;
    for (const auto& [succ, p] : it->second)
        if (succ == s2) return p;
    return 0.0;
}

const std::vector<std::pair<JointState, double>>& Mmdp::successors(JointState s,
                                                                   JointAction a) const {
    static const std::vector<std::pair<JointState, double>> kEmpty;
    auto it = transitions_.find(sa_key(s, a));
    return it == transitions_.end() ? kEmpty : it->second;
}

bool Mmdp::action_admissible(JointState s, JointAction a) const {
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        std::uint32_t si = states_.digit(s, i);
        std::uint32_t ai = actions_.digit(a, i);
        const auto& allow = admissible_[i][si];
        if (!std::binary_search(allow.begin(), allow.end(), ai)) return false;
    }
    return true;
}

std::vector<JointAction> Mmdp::admissible_actions(JointState s) const {
    std::vector<std::uint32_t> d(agents_.size());
    states_.decode(s, d);
    // Product of per-agent admissible sets, emitted in ascending joint index
    // order (agent 0 most significant).
    std::vector<const std::vector<std::uint32_t>*> sets(agents_.size());
    std::size_t count = 1;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        sets[i] = &admissible_[i][d[i]];
        count *= sets[i]->size();
    }
    std::vector<JointAction> out;
    out.reserve(count);
    std::vector<std::size_t> pos(agents_.size(), 0);
    std::vector<std::uint32_t> digits(agents_.size());
    for (;;) {
        for (std::size_t i = 0; i < agents_.size(); ++i) digits[i] = (*sets[i])[pos[i]];
        out.push_back(actions_.encode(digits));
        std::size_t i = agents_.size();
        while (i > 0) {
            --i;
            if (++pos[i] < sets[i]->size()) break;
            pos[i] = 0;
            if (i == 0) return out;
        }
    }
}

MmdpBuilder& MmdpBuilder::agents(std::vector<std::string> names) {
    m_.agents_ = std::move(names);
    m_.state_labels_.resize(m_.agents_.size());
    m_.action_labels_.resize(m_.agents_.size());
    return *this;
}

MmdpBuilder& MmdpBuilder::state_labels(AgentIndex i, std::vector<std::string> labels) {
    m_.state_labels_.at(i) = std::move(labels);
    spaces_ready_ = false;
    return *this;
}

MmdpBuilder& MmdpBuilder::action_labels(AgentIndex i, std::vector<std::string> labels) {
    m_.action_labels_.at(i) = std::move(labels);
    spaces_ready_ = false;
    return *this;
}

MmdpBuilder& MmdpBuilder::admissible(AgentIndex i, std::uint32_t state,
                                     std::vector<std::uint32_t> allow) {
    ensure_spaces();
    std::sort(allow.begin(), allow.end());
    allow.erase(std::unique(allow.begin(), allow.end()), allow.end());
    if (allow.empty()) throw std::invalid_argument("admissible: empty action set");
    for (auto a : allow)
        if (a >= m_.action_labels_.at(i).size())
            throw std::out_of_range("admissible: action index out of range");
    m_.admissible_.at(i).at(state) = std::move(allow);
    return *this;
}

MmdpBuilder& MmdpBuilder::transition(JointState s, JointAction a, JointState s2, double p) {
    ensure_spaces();
    if (s >= m_.states_.size() || s2 >= m_.states_.size())
        throw std::out_of_range("transition: state index out of range");
    if (a >= m_.actions_.size()) throw std::out_of_range("transition: action index out of range");
    if (p == 0.0) return *this;
    m_.transitions_[m_.sa_key(s, a)].emplace_back(s2, p);
    return *this;
}

MmdpBuilder& MmdpBuilder::transition_t(std::span<const std::uint32_t> s,
                                       std::span<const std::uint32_t> a,
                                       std::span<const std::uint32_t> s2, double p) {
    ensure_spaces();
    return transition(m_.states_.encode(s), m_.actions_.encode(a), m_.states_.encode(s2), p);
}

MmdpBuilder& MmdpBuilder::unsafe(UnsafeSpec spec) {
    m_.unsafe_ = std::move(spec);
    return *this;
}

const IndexSpace& MmdpBuilder::state_space() {
    ensure_spaces();
    return m_.states_;
}

const IndexSpace& MmdpBuilder::action_space() {
    ensure_spaces();
    return m_.actions_;
}

void MmdpBuilder::ensure_spaces() {
    if (spaces_ready_) return;
    std::vector<std::uint32_t> ssizes, asizes;
    for (const auto& labels : m_.state_labels_) {
        if (labels.empty()) throw std::invalid_argument("MmdpBuilder: agent without states");
        ssizes.push_back(static_cast<std::uint32_t>(labels.size()));
    }
    for (const auto& labels : m_.action_labels_) {
        if (labels.empty()) throw std::invalid_argument("MmdpBuilder: agent without actions");
        asizes.push_back(static_cast<std::uint32_t>(labels.size()));
    }
    m_.states_ = IndexSpace(ssizes);
    m_.actions_ = IndexSpace(asizes);
    m_.admissible_.assign(m_.agents_.size(), {});
    for (std::size_t i = 0; i < m_.agents_.size(); ++i) {
        std::vector<std::uint32_t> all(asizes[i]);
        for (std::uint32_t a = 0; a < asizes[i]; ++a) all[a] = a;
        m_.admissible_[i].assign(ssizes[i], all);
    }
    spaces_ready_ = true;
}

Mmdp MmdpBuilder::finish() {
    ensure_spaces();

    // Merge duplicate successors and sort each row by successor index.
    for (auto& [key, row] : m_.transitions_) {
        std::map<JointState, double> merged;
        for (const auto& [s2, p] : row) merged[s2] += p;
        row.assign(merged.begin(), merged.end());
    }

    // Intern location labels across agents for the collision predicate.
    std::unordered_map<std::string, std::uint32_t> intern;
    m_.location_ids_.resize(m_.agents_.size());
    for (std::size_t i = 0; i < m_.agents_.size(); ++i) {
        m_.location_ids_[i].clear();
        for (const auto& label : m_.state_labels_[i]) {
            auto [it, _] = intern.emplace(label, static_cast<std::uint32_t>(intern.size()));
            m_.location_ids_[i].push_back(it->second);
        }
    }

    if (m_.unsafe_.kind == UnsafeSpec::Kind::ExplicitList) {
        m_.explicit_unsafe_.clear();
        for (const auto& labels : m_.unsafe_.explicit_states) {
            if (labels.size() != m_.agents_.size())
                throw std::invalid_argument("unsafe explicit state: wrong arity");
            std::vector<std::uint32_t> d(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) {
                const auto& sl = m_.state_labels_[i];
                auto it = std::find(sl.begin(), sl.end(), labels[i]);
                if (it == sl.end())
                    throw std::invalid_argument("unsafe explicit state: unknown label " +
                                                labels[i]);
                d[i] = static_cast<std::uint32_t>(it - sl.begin());
            }
            m_.explicit_unsafe_.insert(m_.states_.encode(d));
        }
    } else if (m_.unsafe_.kind == UnsafeSpec::Kind::Forbidden) {
        auto it = std::find(m_.agents_.begin(), m_.agents_.end(), m_.unsafe_.forbidden_agent);
        if (it == m_.agents_.end())
            throw std::invalid_argument("unsafe forbidden: unknown agent " +
                                        m_.unsafe_.forbidden_agent);
        m_.forbidden_agent_index_ = static_cast<AgentIndex>(it - m_.agents_.begin());
        const auto& sl = m_.state_labels_[m_.forbidden_agent_index_];
        m_.forbidden_local_.assign(sl.size(), false);
        for (const auto& loc : m_.unsafe_.forbidden_locations) {
            auto jt = std::find(sl.begin(), sl.end(), loc);
            if (jt != sl.end()) m_.forbidden_local_[jt - sl.begin()] = true;
        }
    }

    return std::move(m_);
}

ValidationReport validate_mmdp(const Mmdp& m) {
    ValidationReport report;
    const std::uint64_t n_states = m.states().size();

    for (JointState s = 0; s < n_states; ++s) {
        const bool unsafe_s = m.is_unsafe(s);
        for (JointAction a : m.admissible_actions(s)) {
            const auto& row = m.successors(s, a);
            double sum = 0.0;
            double escape = 0.0;
            for (const auto& [s2, p] : row) {
                if (p < 0.0 || p > 1.0) {
                    report.violations.push_back(
                        {"PROB_RANGE", joint_state_text(m, s),
                         "probability " + std::to_string(p) + " outside [0,1]"});
                }
                sum += p;
                if (unsafe_s && !m.is_unsafe(s2)) escape += p;
            }
            if (std::abs(sum - 1.0) > kProbTolerance) {
                report.violations.push_back({"ROW_SUM", joint_state_text(m, s),
                                             "outgoing probabilities sum to " +
                                                 std::to_string(sum)});
            }
            if (unsafe_s && escape > 0.0) {
                report.violations.push_back(
                    {"NOT_ABSORBING", joint_state_text(m, s),
                     "unsafe state can reach a safe state with probability " +
                         std::to_string(escape)});
            }
        }
    }
    return report;
}

ValidationReport validate_trajectory(const Mmdp& m, const Trajectory& tr) {
    ValidationReport report;
    if (tr.states.empty()) {
        report.violations.push_back({"BAD_SHAPE", "trajectory", "no states"});
        return report;
    }
    if (tr.actions.size() + 1 != tr.states.size()) {
        report.violations.push_back(
            {"BAD_SHAPE", "trajectory",
             "need exactly one fewer action than states, got " + std::to_string(tr.actions.size()) +
                 " actions for " + std::to_string(tr.states.size()) + " states"});
        return report;
    }
    for (std::size_t t = 0; t + 1 < tr.states.size(); ++t) {
        JointState s = tr.states[t];
        JointAction a = tr.actions[t];
        if (!m.action_admissible(s, a)) {
            report.violations.push_back({"INADMISSIBLE_ACTION", "stage " + std::to_string(t),
                                         "observed action not admissible at " +
                                             joint_state_text(m, s)});
            continue;
        }
        double p = 0.0;
        for (const auto& [s2, q] : m.successors(s, a))
            if (s2 == tr.states[t + 1]) p = q;
        if (p <= 0.0) {
            report.violations.push_back({"IMPOSSIBLE_STEP", "stage " + std::to_string(t),
                                         "transition " + joint_state_text(m, s) + " -> " +
                                             joint_state_text(m, tr.states[t + 1]) +
                                             " has probability 0"});
        }
    }
    if (tr.violation && !m.is_unsafe(tr.states.back())) {
        report.violations.push_back({"NOT_VIOLATING", "terminal state",
                                     "flagged as violation but final state " +
                                         joint_state_text(m, tr.states.back()) + " is safe"});
    }
    return report;
}

}  // namespace dor
