#pragma once

// Shared helpers for the test suites: seeded random instances and slow
// independent oracles. Everything here is deliberately brute-force and kept
// separate from the library implementation paths it is used to check.

#include <cmath>
#include <vector>

#include "opslab/mdp.hpp"
#include "opslab/rng.hpp"

namespace testutil {

// Random layered MDP with dense transitions and Bernoulli-style rewards.
inline opslab::Mdp random_mdp(int horizon, int states, int actions, std::uint64_t seed,
                              double r_max = 1.0) {
    using namespace opslab;
    Rng rng(seed);
    Mdp mdp;
    mdp.horizon = horizon;
    mdp.num_actions = actions;
    mdp.states_per_layer.assign(horizon, states);
    mdp.initial_state = 0;
    mdp.r_max = r_max;
    mdp.transition.assign(horizon - 1, {});
    mdp.reward.assign(horizon, {});
    for (int h = 0; h < horizon; ++h) {
        mdp.reward[h].assign(states, std::vector<RewardDist>(actions));
        if (h + 1 < horizon)
            mdp.transition[h].assign(states, std::vector<std::vector<double>>(
                                                 actions, std::vector<double>(states, 0.0)));
        for (int s = 0; s < states; ++s) {
            for (int a = 0; a < actions; ++a) {
                mdp.reward[h][s][a] = RewardDist::bernoulli(rng.next_double(), r_max);
                if (h + 1 < horizon) {
                    double total = 0.0;
                    auto& row = mdp.transition[h][s][a];
                    for (int sp = 0; sp < states; ++sp) {
                        row[sp] = 0.05 + rng.next_double();
                        total += row[sp];
                    }
                    double acc = 0.0;
                    for (int sp = 0; sp + 1 < states; ++sp) {
                        row[sp] /= total;
                        acc += row[sp];
                    }
                    row[states - 1] = 1.0 - acc;
                }
            }
        }
    }
    mdp.validate();
    return mdp;
}

inline opslab::Policy random_policy(const opslab::Mdp& mdp, std::uint64_t seed) {
    opslab::Rng rng(seed);
    opslab::Policy pi;
    pi.probs.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        pi.probs[h].resize(mdp.states_per_layer[h]);
        for (auto& row : pi.probs[h]) {
            row.resize(mdp.num_actions);
            double total = 0.0;
            for (double& p : row) {
                p = 0.05 + rng.next_double();
                total += p;
            }
            double acc = 0.0;
            for (std::size_t a = 0; a + 1 < row.size(); ++a) {
                row[a] /= total;
                acc += row[a];
            }
            row.back() = 1.0 - acc;
        }
    }
    return pi;
}

inline opslab::QFunction random_q(const opslab::Mdp& mdp, std::uint64_t seed, double scale = 1.0) {
    opslab::Rng rng(seed);
    opslab::QFunction q = opslab::QFunction::zeros(mdp);
    for (auto& layer : q.table)
        for (auto& row : layer)
            for (double& v : row) v = (rng.next_double() * 2.0 - 1.0) * scale;
    return q;
}

// Monte-Carlo policy value, (mean, stderr).
inline std::pair<double, double> monte_carlo_value(const opslab::Mdp& mdp,
                                                   const opslab::Policy& pi, int episodes,
                                                   std::uint64_t seed) {
    opslab::Dataset data = opslab::sample_trajectories(mdp, pi, episodes, seed);
    double sum = 0.0, sumsq = 0.0;
    for (const auto& traj : data.trajectories) {
        const double g = traj.ret();
        sum += g;
        sumsq += g * g;
    }
    const double mean = sum / episodes;
    const double var = std::max(0.0, sumsq / episodes - mean * mean);
    return {mean, std::sqrt(var / episodes)};
}

// Independent Bellman-error oracle: plain double loop over everything.
inline double brute_force_bellman_error(const opslab::Mdp& mdp, const opslab::QFunction& q,
                                        const opslab::Occupancy& mu) {
    double total = 0.0;
    for (int h = 0; h < mdp.horizon; ++h) {
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                double backup = 0.0;
                const auto& rd = mdp.reward[h][s][a];
                for (std::size_t i = 0; i < rd.values.size(); ++i)
                    backup += rd.probs[i] * rd.values[i];
                if (h + 1 < mdp.horizon) {
                    for (int sp = 0; sp < mdp.states_per_layer[h + 1]; ++sp) {
                        double best = q.table[h + 1][sp][0];
                        for (int ap = 1; ap < mdp.num_actions; ++ap)
                            best = std::max(best, q.table[h + 1][sp][ap]);
                        backup += mdp.transition[h][s][a][sp] * best;
                    }
                }
                const double d = q.table[h][s][a] - backup;
                total += mu[h][s][a] * d * d;
            }
        }
    }
    return total / mdp.horizon;
}

// Enumerate all deterministic policies of a small MDP.
inline std::vector<opslab::Policy> enumerate_deterministic_policies(const opslab::Mdp& mdp) {
    using namespace opslab;
    std::vector<std::pair<int, int>> slots;  // (h, s)
    for (int h = 0; h < mdp.horizon; ++h)
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) slots.push_back({h, s});
    const std::size_t count = slots.size();
    std::vector<Policy> out;
    std::vector<int> choice(count, 0);
    while (true) {
        Policy pi;
        pi.probs.resize(mdp.horizon);
        for (int h = 0; h < mdp.horizon; ++h)
            pi.probs[h].assign(mdp.states_per_layer[h], std::vector<double>(mdp.num_actions, 0.0));
        for (std::size_t i = 0; i < count; ++i)
            pi.probs[slots[i].first][slots[i].second][choice[i]] = 1.0;
        out.push_back(std::move(pi));
        std::size_t i = 0;
        while (i < count && ++choice[i] == mdp.num_actions) choice[i++] = 0;
        if (i == count) break;
    }
    return out;
}

}  // namespace testutil
