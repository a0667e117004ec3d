#include "opslab/reduction.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "opslab/env.hpp"
#include "opslab/estimators.hpp"
#include "opslab/rng.hpp"

namespace opslab {

OpsOracle exact_dp_oracle() {
    return OpsOracle([](const Mdp& probe, const CandidateSet& candidates) {
        int best = 0;
        double best_j = exact_policy_value(probe, candidates.entries[0].policy);
        for (std::size_t k = 1; k < candidates.entries.size(); ++k) {
            const double j = exact_policy_value(probe, candidates.entries[k].policy);
            if (j > best_j) {
                best_j = j;
                best = static_cast<int>(k);
            }
        }
        return best;
    });
}

OpsOracle sampling_is_oracle(int n_per_call, std::uint64_t seed) {
    if (n_per_call < 1) throw std::invalid_argument("sampling_is_oracle: n_per_call must be >= 1");
    auto call_index = std::make_shared<std::uint64_t>(0);
    return OpsOracle([n_per_call, seed, call_index](const Mdp& probe,
                                                    const CandidateSet& candidates) {
        std::vector<Policy> policies;
        for (const auto& entry : candidates.entries) policies.push_back(entry.policy);
        const std::vector<double> weights(policies.size(), 1.0 / policies.size());
        const Dataset data = sample_mixture_trajectories(probe, policies, weights, n_per_call,
                                                         derive_seed(seed, (*call_index)++));
        const SelectionReport report = ops_by_estimate(
            candidates,
            [&](const TrainedCandidate& c) { return is_estimate(data, c.policy); }, "is");
        return report.chosen[0];
    });
}

int bisection_call_budget(double v_max, double eps_prime) {
    return static_cast<int>(std::ceil(std::log2(v_max / eps_prime)));
}

ReductionResult ope_via_ops(OpsOracle& oracle, const Mdp& mdp, const Policy& target, double eps) {
    const double v_max = mdp.v_max();
    if (!(eps > 0.0) || eps > v_max)
        throw std::invalid_argument("ope_via_ops: eps must be in (0, V_max]");

    ReductionResult result;
    result.eps_prime = 2.0 * eps / 3.0;
    double lo = 0.0, hi = v_max;
    while (hi - lo > result.eps_prime) {
        const double r = (hi + lo) / 2.0;
        const Mdp probe = make_reward_probe(mdp, r);
        CandidateSet candidates;
        TrainedCandidate take, enter;
        take.policy = probe_policy_take_reward(probe);
        take.q = policy_q(probe, take.policy);
        enter.policy = probe_policy_enter(probe, target);
        enter.q = policy_q(probe, enter.policy);
        candidates.entries = {std::move(take), std::move(enter)};

        const int chosen = oracle.select(probe, candidates);
        if (chosen == 0)
            hi = r;
        else if (chosen == 1)
            lo = r;
        else
            throw std::runtime_error("ope_via_ops: oracle returned index outside {0, 1}");

        BisectionStep step;
        step.call = static_cast<int>(result.trace.size()) + 1;
        step.r = r;
        step.chosen = chosen;
        step.lo = lo;
        step.hi = hi;
        result.trace.push_back(step);
        if (step.call > bisection_call_budget(v_max, result.eps_prime))
            throw std::runtime_error("ope_via_ops: call budget exceeded");
    }
    result.calls = static_cast<int>(result.trace.size());
    result.estimate = (hi + lo) / 2.0;
    return result;
}

}  // namespace opslab
