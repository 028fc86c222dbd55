#include "dor/pipeline.hpp"

#include <chrono>

namespace dor {

DorReport analyze(const Mmdp& m, const Trajectory& tr, const PipelineOptions& opts,
                  std::string scenario_name, PipelineStats* stats) {
    const auto started = std::chrono::steady_clock::now();
    const auto horizon = static_cast<std::uint32_t>(tr.states.size());
    QTable q = compute_q(m, horizon, opts.q_options);

    UtilityCache utilities(
        [&](CoalitionMask coalition) { return coalition_utility(m, q, tr, coalition); });
    UtilityFn u = [&utilities](CoalitionMask mask) { return utilities(mask); };

    // Screening runs either way; it is a handful of table lookups and the
    // report carries its output. --restrict additionally narrows the lattice.
    CoalitionMask identified = identify_responsible(m, q, tr, opts.epsilon);
    CoalitionMask lattice =
        opts.restrict_to_identified ? identified : full_mask(m.agent_count());

    std::vector<double> phi = restricted_shapley(u, lattice, m.agent_count());
    DorReport report = make_dor_report(std::move(scenario_name), m.agents(), std::move(phi),
                                       identified, utilities.snapshot());
    if (stats) {
        stats->qtable_cells = q.cell_count();
        stats->qtable_bytes = q.cell_count() * sizeof(double);
        stats->elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    return report;
}

}  // namespace dor
