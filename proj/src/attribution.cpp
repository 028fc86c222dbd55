#include "dor/attribution.hpp"

#include <bit>
#include <cmath>

namespace dor {

double UtilityCache::operator()(CoalitionMask mask) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = memo_.find(mask);
        if (it != memo_.end()) return it->second;
    }
    double value = fn_(mask);
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, _] = memo_.emplace(mask, value);
    return it->second;
}

std::map<CoalitionMask, double> UtilityCache::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return {memo_.begin(), memo_.end()};
}

namespace {

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t j = 1; j <= k; ++j) r = r * double(n - k + j) / double(j);
    return r;
}

}  // namespace

double shapley_coefficient(std::size_t n_agents, std::size_t coalition_size) {
    if (coalition_size >= n_agents)
        throw std::invalid_argument("shapley_coefficient: coalition too large");
    return 1.0 / (double(n_agents) * binomial(n_agents - 1, coalition_size));
}

std::vector<double> restricted_shapley(const UtilityFn& u, CoalitionMask responsible,
                                       std::size_t n_agents) {
    if (n_agents > kMaxShapleyAgents)
        throw guard_error("shapley: exact enumeration limited to " +
                          std::to_string(kMaxShapleyAgents) + " agents");
    if (responsible & ~full_mask(n_agents))
        throw std::invalid_argument("restricted_shapley: responsible set beyond agent count");

    std::vector<double> phi(n_agents, 0.0);
    const std::size_t r = std::popcount(responsible);
    if (r == 0) return phi;

    // weight[k] = k! (r-k-1)! / r! = 1 / (r * C(r-1, k))
    std::vector<double> weight(r);
    for (std::size_t k = 0; k < r; ++k) weight[k] = shapley_coefficient(r, k);

    for (AgentIndex i = 0; i < n_agents; ++i) {
        const CoalitionMask bit = CoalitionMask(1) << i;
        if (!(responsible & bit)) continue;
        const CoalitionMask rest = responsible & ~bit;
        // enumerate all subsets of rest, including the empty set
        CoalitionMask sub = rest;
        for (;;) {
            std::size_t k = std::popcount(sub);
            phi[i] += weight[k] * (u(sub | bit) - u(sub));
            if (sub == 0) break;
            sub = (sub - 1) & rest;
        }
    }
    return phi;
}

std::vector<double> shapley(const UtilityFn& u, std::size_t n_agents) {
    return restricted_shapley(u, full_mask(n_agents), n_agents);
}

std::vector<double> dor_from_shapley(const std::vector<double>& phi) {
    double total = 0.0;
    for (double v : phi) {
        if (v > kProbTolerance)
            throw invariant_error("dor_from_shapley: positive shapley value " +
                                  std::to_string(v));
        total += v;
    }
    std::vector<double> psi(phi.size(), 0.0);
    if (std::abs(total) <= kProbTolerance) return psi;  // no responsibility anywhere
    for (std::size_t i = 0; i < phi.size(); ++i)
        psi[i] = phi[i] >= 0.0 ? 0.0 : phi[i] / total;  // maps -0.0 to +0.0 as well
    return psi;
}

DorReport make_dor_report(std::string scenario, std::vector<std::string> agents,
                          std::vector<double> phi, CoalitionMask responsible,
                          std::map<CoalitionMask, double> utilities, std::optional<double> bound,
                          bool uncertified_bound) {
    if (agents.size() != phi.size())
        throw std::invalid_argument("make_dor_report: agents/phi size mismatch");
    DorReport report;
    report.scenario = std::move(scenario);
    report.agents = std::move(agents);
    report.psi = dor_from_shapley(phi);
    report.phi = std::move(phi);
    report.responsible = responsible;
    report.utilities = std::move(utilities);
    report.bound = bound;
    report.uncertified_bound = uncertified_bound;

    double psi_sum = 0.0;
    for (double p : report.psi) psi_sum += p;
    report.no_responsibility = psi_sum == 0.0;
    if (!report.no_responsibility && std::abs(psi_sum - 1.0) > kProbTolerance)
        throw invariant_error("make_dor_report: psi does not sum to 1");
    return report;
}

}  // namespace dor
