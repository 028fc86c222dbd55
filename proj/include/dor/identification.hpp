#pragma once

#include <vector>

#include "dor/mmdp.hpp"
#include "dor/reachability.hpp"
#include "dor/types.hpp"

namespace dor {

/// Best single-agent deviation at one stage of the observed path: how much
/// the unsafe-reach probability drops when agent `agent` alone replaces its
/// observed action while everyone else keeps theirs.
struct MarginalImprovement {
    AgentIndex agent = 0;
    std::size_t stage = 0;
    std::uint32_t best_action = 0;  // local action index; observed one if no alternative
    double improvement = 0.0;       // >= 0; 0 when no alternative helps or none exists
};

/// Maximizes q(s^t, a^t, T-t) - q(s^t, substituted, T-t) over the agent's
/// admissible alternatives to its observed action. Ties break by smallest
/// local action index. Requires 0 <= t <= T-2 and q.horizon() >= T.
MarginalImprovement marginal_improvement(const Mmdp& m, const QTable& q, const Trajectory& tr,
                                         AgentIndex agent, std::size_t t);

/// All (agent, stage) improvements, for diagnostics.
std::vector<MarginalImprovement> marginal_improvements(const Mmdp& m, const QTable& q,
                                                       const Trajectory& tr);

/// Screening pass: an agent is flagged responsible when some stage admits a
/// single-agent deviation improving the reach probability by at least
/// epsilon. Cost is one Q lookup per (agent, stage, alternative action);
/// coalition utilities are never touched.
CoalitionMask identify_responsible(const Mmdp& m, const QTable& q, const Trajectory& tr,
                                   double epsilon);

/// Convenience overload that computes the QTable itself.
CoalitionMask identify_responsible(const Mmdp& m, const Trajectory& tr, double epsilon);

}  // namespace dor
