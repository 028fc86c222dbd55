#pragma once

#include <string>

#include "dor/attribution.hpp"
#include "dor/identification.hpp"
#include "dor/mmdp.hpp"
#include "dor/reachability.hpp"

namespace dor {

struct PipelineOptions {
    bool restrict_to_identified = false;  // run screening first, attribute over that set only
    double epsilon = 1e-6;
    QOptions q_options;
};

struct PipelineStats {
    std::uint64_t qtable_cells = 0;
    std::uint64_t qtable_bytes = 0;
    double elapsed_seconds = 0.0;
};

/// End-to-end attribution on an exact model: reachability table, coalition
/// utilities, screening, Shapley values, DoR normalization.
DorReport analyze(const Mmdp& m, const Trajectory& tr, const PipelineOptions& opts = {},
                  std::string scenario_name = "", PipelineStats* stats = nullptr);

}  // namespace dor
