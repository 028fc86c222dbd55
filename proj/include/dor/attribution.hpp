#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dor/types.hpp"

namespace dor {

using UtilityFn = std::function<double(CoalitionMask)>;

/// Memoizes a coalition utility function by bitmask. Insert-or-get is safe
/// under concurrent callers; a given mask is evaluated at most once per
/// winning thread and the stored value is returned afterwards.
class UtilityCache {
  public:
    explicit UtilityCache(UtilityFn fn) : fn_(std::move(fn)) {}

    double operator()(CoalitionMask mask) const;

    /// Snapshot of everything evaluated so far, ordered by mask.
    std::map<CoalitionMask, double> snapshot() const;

  private:
    UtilityFn fn_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<CoalitionMask, double> memo_;
};

/// Order-averaging coefficient |Y|! (n-|Y|-1)! / n! for a coalition of the
/// given size among n agents.
double shapley_coefficient(std::size_t n_agents, std::size_t coalition_size);

/// Exact Shapley values phi_i = sum over coalitions Y not containing i of
/// |Y|! (n-|Y|-1)! / n! * (u(Y + i) - u(Y)). Requires n <= 20.
std::vector<double> shapley(const UtilityFn& u, std::size_t n_agents);

/// Shapley restricted to subsets of `responsible`; agents outside it get 0.
/// With responsible = all agents this is exactly shapley().
std::vector<double> restricted_shapley(const UtilityFn& u, CoalitionMask responsible,
                                       std::size_t n_agents);

/// Normalizes non-positive Shapley values into degrees of responsibility:
/// psi_i = phi_i / sum(phi). When the total is 0 (within 1e-9) all psi are 0
/// and the caller should flag no_responsibility. Throws invariant_error on a
/// phi above the non-positivity tolerance.
std::vector<double> dor_from_shapley(const std::vector<double>& phi);

/// Attribution result for one analyzed trajectory.
struct DorReport {
    std::string scenario;
    std::vector<std::string> agents;
    std::vector<double> phi;           // non-positive Shapley values
    std::vector<double> psi;           // degrees of responsibility, sum 1 or all 0
    CoalitionMask responsible = 0;     // screening output
    bool no_responsibility = false;
    std::map<CoalitionMask, double> utilities;  // audit trail of evaluated coalitions
    std::optional<double> bound;       // local-approximation error bound, when applicable
    bool uncertified_bound = false;
};

/// Assembles a report and enforces its invariants (phi non-positive within
/// 1e-9; psi in [0,1] summing to 1 unless no_responsibility).
DorReport make_dor_report(std::string scenario, std::vector<std::string> agents,
                          std::vector<double> phi, CoalitionMask responsible,
                          std::map<CoalitionMask, double> utilities,
                          std::optional<double> bound = std::nullopt,
                          bool uncertified_bound = false);

}  // namespace dor
