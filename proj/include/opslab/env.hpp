#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "opslab/mdp.hpp"

namespace opslab {

// ---- Tabular environment constructors ----

struct GridworldParams {
    int width = 3;
    int height = 3;
    int horizon = 6;
    double slip_prob = 0.0;      // executed move replaced by a uniform one w.p. slip_prob
    std::vector<double> reward_layout;  // per cell, row-major; empty -> goal at last cell, reward 1
    std::uint64_t seed = 0;      // reserved for randomized layouts
};

// Layered gridworld with A=4 moves (up, down, left, right); moving off the
// grid stays in place. The reward for (s, a) is the layout value of the cell
// actually reached, marginalized over slip. Sets metadata["goal_unreachable"]
// when no positive-reward cell is reachable within the horizon.
Mdp make_gridworld(const GridworldParams& params);

// The hard OPE/OPS instance pair: a single rewarding chain s_0 -> ... ->
// s_{H-1} where the on-path action at s_h is argmin_a pi_b(a|s_h) (ties to the
// lowest action id) and every other action drops into absorbing zero-reward
// states. The two MDPs differ only in the terminal reward: Bernoulli mean 1/2
// versus 1/2 - 2*eps. Requires 0 < eps <= sqrt(1/8).
std::pair<Mdp, Mdp> make_tree_hard(int num_actions, int horizon, double eps,
                                   const Policy* behavior = nullptr);

// The policy that follows the rewarding chain of a tree-hard MDP.
Policy tree_hard_on_path_policy(const Mdp& tree_mdp);

// Wrap an MDP with a prepended binary choice: action 0 at the new initial
// state yields reward r then an absorbing chain; action 1 enters the base MDP
// with zero reward. Requires 0 <= r <= v_max of the base MDP. The result has
// S+2 extra states spread over H+1 layers.
Mdp make_reward_probe(const Mdp& base, double r);

// Policies on a reward-probe MDP: take the fixed reward, or enter the base
// MDP and follow `target` there.
Policy probe_policy_take_reward(const Mdp& probe);
Policy probe_policy_enter(const Mdp& probe, const Policy& target);

// Fold sticky actions into the explicit state space: augmented states are
// (base state, last executed action, consecutive repeat count). At each step
// after the first, with probability repeat_prob (unless the repeat cap is
// reached) the executed action is the previous one instead of the chosen one.
Mdp sticky_wrap(const Mdp& base, double repeat_prob = 0.25, int max_repeats = 4);

// Lift a base-MDP policy to the matching sticky-wrapped MDP (the policy reads
// only the base-state component).
Policy lift_policy_sticky(const Mdp& wrapped, const Mdp& base, const Policy& base_policy);

// Base-state index of an augmented sticky state.
int sticky_base_state(const Mdp& wrapped, int h, int s);

// ---- Simulation-only continuous-state environments ----

struct SimStep {
    double reward;
    std::vector<double> observation;
    bool done;
};

// Single-threaded episodic simulator with vector observations, per-step
// rewards quantized to {0, 1} so returns stay in [0, H].
class SimOnlyEnv {
  public:
    virtual ~SimOnlyEnv() = default;
    virtual std::vector<double> reset() = 0;
    virtual SimStep step(int action) = 0;
    virtual int horizon() const = 0;
    virtual int num_actions() const = 0;
    virtual int observation_dim() const = 0;
};

enum class ContinuousKind { cartpole_like, acrobot_like };

std::unique_ptr<SimOnlyEnv> make_continuous_control(ContinuousKind kind, int horizon,
                                                    std::uint64_t seed);

// Monte-Carlo value of a uniformly random policy on a simulator; returns
// (mean return, standard error).
std::pair<double, double> sim_random_policy_value(SimOnlyEnv& env, int episodes,
                                                  std::uint64_t seed);

}  // namespace opslab
