#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace opslab {

// Finite-horizon layered MDP. States live in per-layer index spaces: a state
// is identified by (layer h, index within layer). Layers are disjoint by
// construction, so all tables are indexed [h][s][a].
//
// Transitions from layer h lead to layer h+1; the last layer (h = H-1) has no
// outgoing transitions and trajectories record a virtual terminal successor.

// Discrete finite-support reward distribution, values in [0, r_max].
struct RewardDist {
    std::vector<double> values;
    std::vector<double> probs;

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
        return m;
    }
    static RewardDist point(double v) { return RewardDist{{v}, {1.0}}; }
    static RewardDist bernoulli(double p, double hi = 1.0) {
        return RewardDist{{0.0, hi}, {1.0 - p, p}};
    }
};

struct Mdp {
    int horizon = 0;      // H
    int num_actions = 0;  // A
    std::vector<int> states_per_layer;  // length H
    // transition[h][s][a] is a distribution over layer h+1 states, h in [0, H-2].
    std::vector<std::vector<std::vector<std::vector<double>>>> transition;
    // reward[h][s][a]
    std::vector<std::vector<std::vector<RewardDist>>> reward;
    int initial_state = 0;  // index within layer 0
    double r_max = 1.0;
    std::map<std::string, std::string> metadata;

    double v_max() const { return horizon * r_max; }
    double mean_reward(int h, int s, int a) const { return reward[h][s][a].mean(); }

    // Throws std::invalid_argument on malformed kernels (distributions not
    // summing to 1 within 1e-12, reward support outside [0, r_max], shape
    // mismatches).
    void validate() const;
};

// Non-stationary tabular stochastic policy: probs[h][s] is a distribution
// over actions.
struct Policy {
    std::vector<std::vector<std::vector<double>>> probs;

    double prob(int h, int s, int a) const { return probs[h][s][a]; }
    static Policy uniform(const Mdp& mdp);
};

// Tabular action-value function, table[h][s][a].
struct QFunction {
    std::vector<std::vector<std::vector<double>>> table;

    double value(int h, int s, int a) const { return table[h][s][a]; }
    // v_q(h, s) = max_a q(h, s, a)
    double state_value(int h, int s) const;
    static QFunction zeros(const Mdp& mdp);
};

struct Step {
    int h;      // horizon index
    int s;      // state index within layer h
    int a;      // action taken
    double r;   // sampled reward
    int sp;     // next-state index within layer h+1 (0 for the virtual terminal layer)
    double pb;  // behavior policy probability of the taken action
};

struct Trajectory {
    std::vector<Step> steps;  // length H, horizon indices 0..H-1
    double ret() const {
        double g = 0.0;
        for (const auto& st : steps) g += st.r;
        return g;
    }
};

struct Dataset {
    int horizon = 0;
    int num_actions = 0;
    std::vector<Trajectory> trajectories;

    std::size_t num_transitions() const { return trajectories.size() * horizon; }
    void validate() const;  // chaining, lengths, recorded pb > 0
};

// Per-horizon distribution over (state, action): occ[h][s][a].
using Occupancy = std::vector<std::vector<std::vector<double>>>;

// ---- Exact dynamic-programming oracles ----

// J(pi) via backward evaluation. Throws if pi is undefined (wrong shape or
// unnormalized) for a reachable (h, s).
double exact_policy_value(const Mdp& mdp, const Policy& pi);

// q^pi for all (h, s, a), backward DP.
QFunction policy_q(const Mdp& mdp, const Policy& pi);

// q* via backward value iteration.
QFunction optimal_q(const Mdp& mdp);

// Greedy policy, ties broken toward the lowest action index.
Policy greedy_policy(const QFunction& q);

// Exact Bellman (optimality) error E(q) = (1/H) sum_h ||q - Tq||^2_{2,mu_h}.
// The terminal layer uses (Tq)(s,.) = r(s,.). mu must be normalized per layer.
double exact_bellman_error(const Mdp& mdp, const QFunction& q, const Occupancy& mu);

// State-action occupancy d^pi_h(s,a) by forward DP.
Occupancy occupancy(const Mdp& mdp, const Policy& pi);

// Empirical visit frequencies of a dataset, normalized per layer.
Occupancy empirical_occupancy(const Mdp& mdp, const Dataset& data);

// Worst-case density ratio max_{pi, h, s, a} d^pi_h(s,a) / mu_h(s,a) over the
// given policies. Returns +infinity when some d^pi_h(s,a) > 0 has mu_h(s,a)=0
// (signaled sentinel, not an exception).
double concentration_coefficient(const Mdp& mdp, const std::vector<Policy>& policies,
                                 const Occupancy& mu);

// Simulate n full trajectories under pi, recording behavior probabilities.
// Bitwise deterministic for a fixed seed.
Dataset sample_trajectories(const Mdp& mdp, const Policy& pi, int n, std::uint64_t seed);

}  // namespace opslab
