#include "dor/identification.hpp"

#include <algorithm>

namespace dor {

MarginalImprovement marginal_improvement(const Mmdp& m, const QTable& q, const Trajectory& tr,
                                         AgentIndex agent, std::size_t t) {
    if (agent >= m.agent_count())
        throw std::invalid_argument("marginal_improvement: unknown agent");
    if (tr.states.size() < 2 || t + 2 > tr.states.size())
        throw std::domain_error("marginal_improvement: stage must satisfy 0 <= t <= T-2");

    const JointState s = tr.states[t];
    const JointAction observed = tr.actions[t];
    const auto stages = static_cast<std::uint32_t>(tr.states.size() - t);
    const std::uint32_t observed_local = m.actions().digit(observed, agent);
    const double observed_q = q.at(s, observed, stages);

    MarginalImprovement best{agent, t, observed_local, 0.0};
    bool have_alternative = false;
    double best_q = 0.0;
    for (std::uint32_t alt : m.admissible_local(agent, m.states().digit(s, agent))) {
        if (alt == observed_local) continue;
        double v = q.at(s, m.actions().with_digit(observed, agent, alt), stages);
        if (!have_alternative || v < best_q) {
            have_alternative = true;
            best_q = v;
            best.best_action = alt;
        }
    }
    if (!have_alternative) return best;  // singleton action set: improvement 0
    best.improvement = std::max(0.0, observed_q - best_q);
    if (best.improvement == 0.0) best.best_action = observed_local;
    return best;
}

std::vector<MarginalImprovement> marginal_improvements(const Mmdp& m, const QTable& q,
                                                       const Trajectory& tr) {
    std::vector<MarginalImprovement> out;
    if (tr.states.size() < 2) return out;
    for (AgentIndex i = 0; i < m.agent_count(); ++i)
        for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t)
            out.push_back(marginal_improvement(m, q, tr, i, t));
    return out;
}

CoalitionMask identify_responsible(const Mmdp& m, const QTable& q, const Trajectory& tr,
                                   double epsilon) {
    if (epsilon <= 0.0) throw std::domain_error("identify_responsible: epsilon must be positive");
    CoalitionMask responsible = 0;
    if (tr.states.size() < 2) return responsible;
    for (AgentIndex i = 0; i < m.agent_count(); ++i) {
        for (std::size_t t = 0; t + 2 <= tr.states.size(); ++t) {
            if (marginal_improvement(m, q, tr, i, t).improvement >= epsilon) {
                responsible |= CoalitionMask(1) << i;
                break;
            }
        }
    }
    return responsible;
}

CoalitionMask identify_responsible(const Mmdp& m, const Trajectory& tr, double epsilon) {
    QTable q = compute_q(m, static_cast<std::uint32_t>(tr.states.size()));
    return identify_responsible(m, q, tr, epsilon);
}

}  // namespace dor
