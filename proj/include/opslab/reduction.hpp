#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "opslab/candidates.hpp"
#include "opslab/mdp.hpp"

namespace opslab {

// OPE through repeated OPS calls: bisection over reward-probe MDPs. Each call
// builds M_r = make_reward_probe(base, r) with the two-candidate set
// {take-the-reward, enter-and-follow-target} and asks the oracle which is
// better; the answer halves the value interval.

class OpsOracle {
  public:
    // Returns the chosen candidate index for the given probe MDP.
    using Fn = std::function<int(const Mdp& probe, const CandidateSet& candidates)>;

    explicit OpsOracle(Fn fn) : fn_(std::move(fn)) {}

    int select(const Mdp& probe, const CandidateSet& candidates) {
        ++calls_;
        return fn_(probe, candidates);
    }
    int calls() const { return calls_; }

  private:
    Fn fn_;
    int calls_ = 0;
};

// Selects by exact DP policy values on the probe MDP; ties toward index 0.
OpsOracle exact_dp_oracle();

// Selects by importance sampling on fresh data from the probe MDP: each call
// samples n episodes from the equal per-episode mixture of the two candidate
// policies, seeded by (seed, call index).
OpsOracle sampling_is_oracle(int n_per_call, std::uint64_t seed);

struct BisectionStep {
    int call = 0;
    double r = 0.0;
    int chosen = 0;
    double lo = 0.0;  // interval after the call
    double hi = 0.0;
};

struct ReductionResult {
    double estimate = 0.0;
    int calls = 0;
    double eps_prime = 0.0;
    std::vector<BisectionStep> trace;
};

// Bisection with U = V_max, L = 0, stopping at U - L <= eps' where
// eps' = 2*eps/3; the estimate is the final midpoint. With an exact oracle
// |estimate - J(target)| <= eps and the call count never exceeds
// ceil(log2(V_max / eps')). Requires eps in (0, V_max].
ReductionResult ope_via_ops(OpsOracle& oracle, const Mdp& mdp, const Policy& target, double eps);

// Call-budget bound ceil(log2(V_max / eps')).
int bisection_call_budget(double v_max, double eps_prime);

}  // namespace opslab
