#include "opslab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "opslab/rng.hpp"

namespace opslab {

namespace {

constexpr double kDistTol = 1e-12;

void check_dist(const std::vector<double>& p, const std::string& what) {
    double total = 0.0;
    for (double x : p) {
        if (x < 0.0) throw std::invalid_argument(what + ": negative probability");
        total += x;
    }
    if (std::abs(total - 1.0) > kDistTol)
        throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(total));
}

}  // namespace

void Mdp::validate() const {
    if (horizon < 1) throw std::invalid_argument("Mdp: horizon must be >= 1");
    if (num_actions < 1) throw std::invalid_argument("Mdp: num_actions must be >= 1");
    if (static_cast<int>(states_per_layer.size()) != horizon)
        throw std::invalid_argument("Mdp: states_per_layer size != horizon");
    if (static_cast<int>(reward.size()) != horizon)
        throw std::invalid_argument("Mdp: reward table size != horizon");
    if (static_cast<int>(transition.size()) != std::max(0, horizon - 1))
        throw std::invalid_argument("Mdp: transition table size != horizon-1");
    if (initial_state < 0 || initial_state >= states_per_layer[0])
        throw std::invalid_argument("Mdp: initial_state out of range");

    for (int h = 0; h < horizon; ++h) {
        const int S = states_per_layer[h];
        if (static_cast<int>(reward[h].size()) != S)
            throw std::invalid_argument("Mdp: reward layer shape mismatch at h=" + std::to_string(h));
        for (int s = 0; s < S; ++s) {
            if (static_cast<int>(reward[h][s].size()) != num_actions)
                throw std::invalid_argument("Mdp: reward action shape mismatch");
            for (int a = 0; a < num_actions; ++a) {
                const RewardDist& rd = reward[h][s][a];
                if (rd.values.size() != rd.probs.size() || rd.values.empty())
                    throw std::invalid_argument("Mdp: malformed reward distribution");
                check_dist(rd.probs, "Mdp reward(h=" + std::to_string(h) + ",s=" + std::to_string(s) +
                                         ",a=" + std::to_string(a) + ")");
                for (double v : rd.values)
                    if (v < 0.0 || v > r_max)
                        throw std::invalid_argument("Mdp: reward support value outside [0, r_max]");
            }
        }
        if (h + 1 < horizon) {
            const int Sn = states_per_layer[h + 1];
            if (static_cast<int>(transition[h].size()) != S)
                throw std::invalid_argument("Mdp: transition layer shape mismatch");
            for (int s = 0; s < S; ++s) {
                if (static_cast<int>(transition[h][s].size()) != num_actions)
                    throw std::invalid_argument("Mdp: transition action shape mismatch");
                for (int a = 0; a < num_actions; ++a) {
                    if (static_cast<int>(transition[h][s][a].size()) != Sn)
                        throw std::invalid_argument("Mdp: transition next-state shape mismatch");
                    check_dist(transition[h][s][a], "Mdp transition(h=" + std::to_string(h) + ",s=" +
                                                        std::to_string(s) + ",a=" + std::to_string(a) + ")");
                }
            }
        }
    }
}

Policy Policy::uniform(const Mdp& mdp) {
    Policy pi;
    pi.probs.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        pi.probs[h].assign(mdp.states_per_layer[h],
                           std::vector<double>(mdp.num_actions, 1.0 / mdp.num_actions));
    }
    return pi;
}

double QFunction::state_value(int h, int s) const {
    const auto& row = table[h][s];
    return *std::max_element(row.begin(), row.end());
}

QFunction QFunction::zeros(const Mdp& mdp) {
    QFunction q;
    q.table.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h)
        q.table[h].assign(mdp.states_per_layer[h], std::vector<double>(mdp.num_actions, 0.0));
    return q;
}

void Dataset::validate() const {
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& traj = trajectories[i];
        if (static_cast<int>(traj.steps.size()) != horizon)
            throw std::invalid_argument("Dataset: trajectory " + std::to_string(i) +
                                        " has length != horizon");
        for (int h = 0; h < horizon; ++h) {
            const Step& st = traj.steps[h];
            if (st.h != h)
                throw std::invalid_argument("Dataset: horizon indices not strictly increasing 0..H-1");
            if (st.pb <= 0.0)
                throw std::invalid_argument("Dataset: recorded behavior probability must be > 0");
            if (h + 1 < horizon && traj.steps[h + 1].s != st.sp)
                throw std::invalid_argument("Dataset: broken chaining s'_h != s_{h+1} in trajectory " +
                                            std::to_string(i));
        }
    }
}

namespace {

void check_policy_shape(const Mdp& mdp, const Policy& pi) {
    if (static_cast<int>(pi.probs.size()) != mdp.horizon)
        throw std::invalid_argument("Policy: horizon mismatch");
    for (int h = 0; h < mdp.horizon; ++h) {
        if (static_cast<int>(pi.probs[h].size()) != mdp.states_per_layer[h])
            throw std::invalid_argument("Policy: undefined for states at h=" + std::to_string(h));
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
            if (static_cast<int>(pi.probs[h][s].size()) != mdp.num_actions)
                throw std::invalid_argument("Policy: undefined entry at (h=" + std::to_string(h) +
                                            ", s=" + std::to_string(s) + ")");
            check_dist(pi.probs[h][s],
                       "Policy(h=" + std::to_string(h) + ",s=" + std::to_string(s) + ")");
        }
    }
}

}  // namespace

QFunction policy_q(const Mdp& mdp, const Policy& pi) {
    check_policy_shape(mdp, pi);
    const int H = mdp.horizon;
    QFunction q = QFunction::zeros(mdp);
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                double v = mdp.mean_reward(h, s, a);
                if (h + 1 < H) {
                    const auto& trans = mdp.transition[h][s][a];
                    for (int sp = 0; sp < mdp.states_per_layer[h + 1]; ++sp) {
                        if (trans[sp] == 0.0) continue;
                        double vnext = 0.0;
                        for (int ap = 0; ap < mdp.num_actions; ++ap)
                            vnext += pi.probs[h + 1][sp][ap] * q.table[h + 1][sp][ap];
                        v += trans[sp] * vnext;
                    }
                }
                q.table[h][s][a] = v;
            }
        }
    }
    return q;
}

double exact_policy_value(const Mdp& mdp, const Policy& pi) {
    QFunction q = policy_q(mdp, pi);
    double j = 0.0;
    for (int a = 0; a < mdp.num_actions; ++a)
        j += pi.probs[0][mdp.initial_state][a] * q.table[0][mdp.initial_state][a];
    return j;
}

QFunction optimal_q(const Mdp& mdp) {
    const int H = mdp.horizon;
    QFunction q = QFunction::zeros(mdp);
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                double v = mdp.mean_reward(h, s, a);
                if (h + 1 < H) {
                    const auto& trans = mdp.transition[h][s][a];
                    for (int sp = 0; sp < mdp.states_per_layer[h + 1]; ++sp) {
                        if (trans[sp] == 0.0) continue;
                        v += trans[sp] * q.state_value(h + 1, sp);
                    }
                }
                q.table[h][s][a] = v;
            }
        }
    }
    return q;
}

Policy greedy_policy(const QFunction& q) {
    Policy pi;
    pi.probs.resize(q.table.size());
    for (std::size_t h = 0; h < q.table.size(); ++h) {
        pi.probs[h].resize(q.table[h].size());
        for (std::size_t s = 0; s < q.table[h].size(); ++s) {
            const auto& row = q.table[h][s];
            int best = 0;
            for (std::size_t a = 1; a < row.size(); ++a)
                if (row[a] > row[best]) best = static_cast<int>(a);
            pi.probs[h][s].assign(row.size(), 0.0);
            pi.probs[h][s][best] = 1.0;
        }
    }
    return pi;
}

double exact_bellman_error(const Mdp& mdp, const QFunction& q, const Occupancy& mu) {
    const int H = mdp.horizon;
    if (static_cast<int>(mu.size()) != H)
        throw std::invalid_argument("exact_bellman_error: mu horizon mismatch");
    for (int h = 0; h < H; ++h) {
        double total = 0.0;
        for (const auto& row : mu[h])
            for (double p : row) total += p;
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("exact_bellman_error: mu not normalized at h=" +
                                        std::to_string(h));
    }
    double err = 0.0;
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double w = mu[h][s][a];
                if (w == 0.0) continue;
                double backup = mdp.mean_reward(h, s, a);
                if (h + 1 < H) {
                    const auto& trans = mdp.transition[h][s][a];
                    for (int sp = 0; sp < mdp.states_per_layer[h + 1]; ++sp) {
                        if (trans[sp] == 0.0) continue;
                        backup += trans[sp] * q.state_value(h + 1, sp);
                    }
                }
                const double d = q.table[h][s][a] - backup;
                err += w * d * d;
            }
        }
    }
    return err / H;
}

Occupancy occupancy(const Mdp& mdp, const Policy& pi) {
    check_policy_shape(mdp, pi);
    const int H = mdp.horizon;
    Occupancy occ(H);
    for (int h = 0; h < H; ++h)
        occ[h].assign(mdp.states_per_layer[h], std::vector<double>(mdp.num_actions, 0.0));

    std::vector<double> state_dist(mdp.states_per_layer[0], 0.0);
    state_dist[mdp.initial_state] = 1.0;
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
            if (state_dist[s] == 0.0) continue;
            for (int a = 0; a < mdp.num_actions; ++a)
                occ[h][s][a] = state_dist[s] * pi.probs[h][s][a];
        }
        if (h + 1 < H) {
            std::vector<double> next_dist(mdp.states_per_layer[h + 1], 0.0);
            for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
                for (int a = 0; a < mdp.num_actions; ++a) {
                    if (occ[h][s][a] == 0.0) continue;
                    const auto& trans = mdp.transition[h][s][a];
                    for (int sp = 0; sp < mdp.states_per_layer[h + 1]; ++sp)
                        next_dist[sp] += occ[h][s][a] * trans[sp];
                }
            }
            state_dist = std::move(next_dist);
        }
    }
    return occ;
}

Occupancy empirical_occupancy(const Mdp& mdp, const Dataset& data) {
    Occupancy occ(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h)
        occ[h].assign(mdp.states_per_layer[h], std::vector<double>(mdp.num_actions, 0.0));
    const double n = static_cast<double>(data.trajectories.size());
    if (n == 0) throw std::invalid_argument("empirical_occupancy: empty dataset");
    for (const auto& traj : data.trajectories)
        for (const Step& st : traj.steps) occ[st.h][st.s][st.a] += 1.0 / n;
    return occ;
}

double concentration_coefficient(const Mdp& mdp, const std::vector<Policy>& policies,
                                 const Occupancy& mu) {
    double worst = 0.0;
    for (const Policy& pi : policies) {
        Occupancy d = occupancy(mdp, pi);
        for (int h = 0; h < mdp.horizon; ++h) {
            for (int s = 0; s < mdp.states_per_layer[h]; ++s) {
                for (int a = 0; a < mdp.num_actions; ++a) {
                    if (d[h][s][a] <= 0.0) continue;
                    if (mu[h][s][a] <= 0.0) return std::numeric_limits<double>::infinity();
                    worst = std::max(worst, d[h][s][a] / mu[h][s][a]);
                }
            }
        }
    }
    return worst;
}

Dataset sample_trajectories(const Mdp& mdp, const Policy& pi, int n, std::uint64_t seed) {
    check_policy_shape(mdp, pi);
    if (n < 1) throw std::invalid_argument("sample_trajectories: n must be >= 1");
    Rng rng(seed);
    Dataset data;
    data.horizon = mdp.horizon;
    data.num_actions = mdp.num_actions;
    data.trajectories.reserve(n);
    for (int i = 0; i < n; ++i) {
        Trajectory traj;
        traj.steps.reserve(mdp.horizon);
        int s = mdp.initial_state;
        for (int h = 0; h < mdp.horizon; ++h) {
            const int a = rng.categorical(pi.probs[h][s]);
            const RewardDist& rd = mdp.reward[h][s][a];
            const double r = rd.values[rng.categorical(rd.probs)];
            int sp = 0;
            if (h + 1 < mdp.horizon) sp = rng.categorical(mdp.transition[h][s][a]);
            traj.steps.push_back(Step{h, s, a, r, sp, pi.probs[h][s][a]});
            s = sp;
        }
        data.trajectories.push_back(std::move(traj));
    }
    return data;
}

}  // namespace opslab
