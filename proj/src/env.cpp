#include "opslab/env.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

#include "opslab/rng.hpp"

namespace opslab {

namespace {

// Merge duplicate support values of a mixture into one discrete distribution.
RewardDist mix_rewards(const std::vector<std::pair<double, RewardDist>>& weighted) {
    std::map<double, double> mass;
    for (const auto& [w, rd] : weighted) {
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < rd.values.size(); ++i) mass[rd.values[i]] += w * rd.probs[i];
    }
    RewardDist out;
    for (const auto& [v, p] : mass) {
        if (p == 0.0) continue;
        out.values.push_back(v);
        out.probs.push_back(p);
    }
    if (out.values.empty()) return RewardDist::point(0.0);
    return out;
}

}  // namespace

Mdp make_gridworld(const GridworldParams& params) {
    if (params.slip_prob < 0.0 || params.slip_prob >= 1.0)
        throw std::invalid_argument("make_gridworld: slip_prob must be in [0, 1)");
    const int W = params.width;
    const int Ht = params.height;
    const int cells = W * Ht;
    const int H = params.horizon;
    const int A = 4;  // up, down, left, right

    std::vector<double> layout = params.reward_layout;
    if (layout.empty()) {
        layout.assign(cells, 0.0);
        layout[cells - 1] = 1.0;  // goal in the bottom-right corner
    }
    if (static_cast<int>(layout.size()) != cells)
        throw std::invalid_argument("make_gridworld: reward_layout size != width*height");
    for (double v : layout)
        if (v < 0.0) throw std::invalid_argument("make_gridworld: negative reward in layout");

    auto dest = [&](int cell, int move) {
        const int x = cell % W;
        const int y = cell / W;
        switch (move) {
            case 0: return y > 0 ? cell - W : cell;       // up
            case 1: return y + 1 < Ht ? cell + W : cell;  // down
            case 2: return x > 0 ? cell - 1 : cell;       // left
            default: return x + 1 < W ? cell + 1 : cell;  // right
        }
    };

    Mdp mdp;
    mdp.horizon = H;
    mdp.num_actions = A;
    mdp.states_per_layer.assign(H, cells);
    mdp.initial_state = 0;
    mdp.r_max = std::max(1.0, *std::max_element(layout.begin(), layout.end()));
    mdp.transition.assign(H - 1, {});
    mdp.reward.assign(H, {});

    for (int h = 0; h < H; ++h) {
        mdp.reward[h].assign(cells, std::vector<RewardDist>(A));
        if (h + 1 < H)
            mdp.transition[h].assign(cells,
                                     std::vector<std::vector<double>>(A, std::vector<double>(cells, 0.0)));
        for (int s = 0; s < cells; ++s) {
            for (int a = 0; a < A; ++a) {
                // executed-move distribution under slip
                std::vector<std::pair<double, RewardDist>> rew_mix;
                for (int m = 0; m < A; ++m) {
                    double pm = params.slip_prob / A + (m == a ? 1.0 - params.slip_prob : 0.0);
                    if (pm == 0.0) continue;
                    const int d = dest(s, m);
                    if (h + 1 < H) mdp.transition[h][s][a][d] += pm;
                    rew_mix.push_back({pm, RewardDist::point(layout[d])});
                }
                mdp.reward[h][s][a] = mix_rewards(rew_mix);
            }
        }
    }

    const QFunction qstar = optimal_q(mdp);
    const double vstar = qstar.state_value(0, mdp.initial_state);
    const double best_cell = *std::max_element(layout.begin(), layout.end());
    if (best_cell > 0.0 && vstar <= 0.0) mdp.metadata["goal_unreachable"] = "true";
    mdp.metadata["kind"] = "gridworld";
    mdp.validate();
    return mdp;
}

std::pair<Mdp, Mdp> make_tree_hard(int num_actions, int horizon, double eps,
                                   const Policy* behavior) {
    if (num_actions < 2) throw std::invalid_argument("make_tree_hard: need at least 2 actions");
    if (horizon < 1) throw std::invalid_argument("make_tree_hard: horizon must be >= 1");
    if (!(eps > 0.0 && eps <= std::sqrt(0.125)))
        throw std::invalid_argument("make_tree_hard: eps must be in (0, sqrt(1/8)]");
    // The two terminal rewards are Bernoulli(1/2) and Bernoulli(1/2 - 2 eps);
    // the latter needs a nonnegative mean.
    if (eps > 0.25)
        throw std::invalid_argument("make_tree_hard: eps must be <= 1/4 for a valid Bernoulli mean");

    const int A = num_actions;
    const int H = horizon;

    Mdp mdp;
    mdp.horizon = H;
    mdp.num_actions = A;
    mdp.states_per_layer.assign(H, 2);  // 0: on-path s_h, 1: absorbing s_h^o
    mdp.states_per_layer[0] = 1;
    mdp.initial_state = 0;
    mdp.r_max = 1.0;
    mdp.transition.assign(H - 1, {});
    mdp.reward.assign(H, {});

    // on-path action at s_h: argmin_a pi_b(a | s_h), ties to the lowest id
    auto on_path_action = [&](int h) {
        if (behavior == nullptr) return 0;
        const auto& row = behavior->probs[h][0];
        int best = 0;
        for (int a = 1; a < A; ++a)
            if (row[a] < row[best]) best = a;
        return best;
    };

    for (int h = 0; h < H; ++h) {
        const int S = mdp.states_per_layer[h];
        mdp.reward[h].assign(S, std::vector<RewardDist>(A, RewardDist::point(0.0)));
        if (h + 1 < H) {
            mdp.transition[h].assign(S, std::vector<std::vector<double>>(A, std::vector<double>(2, 0.0)));
            const int ah = on_path_action(h);
            for (int a = 0; a < A; ++a)
                mdp.transition[h][0][a][a == ah ? 0 : 1] = 1.0;
            if (S > 1)
                for (int a = 0; a < A; ++a) mdp.transition[h][1][a][1] = 1.0;
        }
    }

    Mdp mdp2 = mdp;
    const int a_last = on_path_action(H - 1);
    mdp.reward[H - 1][0][a_last] = RewardDist::bernoulli(0.5);
    mdp2.reward[H - 1][0][a_last] = RewardDist::bernoulli(0.5 - 2.0 * eps);
    mdp.metadata["kind"] = "tree_hard_1";
    mdp2.metadata["kind"] = "tree_hard_2";
    mdp.validate();
    mdp2.validate();
    return {mdp, mdp2};
}

Policy tree_hard_on_path_policy(const Mdp& tree_mdp) {
    // Recover the on-path action from the transition structure: the action at
    // the on-path state that leads to the next on-path state. At the terminal
    // layer, the action carrying the nonzero reward.
    const int H = tree_mdp.horizon;
    const int A = tree_mdp.num_actions;
    Policy pi;
    pi.probs.resize(H);
    for (int h = 0; h < H; ++h) {
        const int S = tree_mdp.states_per_layer[h];
        pi.probs[h].assign(S, std::vector<double>(A, 0.0));
        int ah = 0;
        if (h + 1 < H) {
            for (int a = 0; a < A; ++a)
                if (tree_mdp.transition[h][0][a][0] == 1.0) { ah = a; break; }
        } else {
            for (int a = 0; a < A; ++a)
                if (tree_mdp.reward[h][0][a].mean() > 0.0 ||
                    tree_mdp.reward[h][0][a].values.size() > 1) { ah = a; break; }
        }
        for (int s = 0; s < S; ++s) pi.probs[h][s][s == 0 ? ah : 0] = 1.0;
    }
    return pi;
}

Mdp make_reward_probe(const Mdp& base, double r) {
    if (r < 0.0 || r > base.v_max())
        throw std::invalid_argument("make_reward_probe: r must be in [0, V_max]");
    const int H = base.horizon + 1;
    const int A = std::max(base.num_actions, 2);
    const int Ab = base.num_actions;

    Mdp mdp;
    mdp.horizon = H;
    mdp.num_actions = A;
    mdp.initial_state = 0;
    mdp.r_max = std::max(base.r_max, r);
    mdp.states_per_layer.resize(H);
    mdp.states_per_layer[0] = 1;
    for (int h = 1; h < H; ++h)
        mdp.states_per_layer[h] = base.states_per_layer[h - 1] + 1;  // +1 absorbing terminal chain
    mdp.transition.assign(H - 1, {});
    mdp.reward.assign(H, {});

    // layer 0: action 0 takes the probe reward, all others enter the base MDP
    mdp.reward[0].assign(1, std::vector<RewardDist>(A, RewardDist::point(0.0)));
    mdp.reward[0][0][0] = RewardDist::point(r);
    {
        const int S1 = mdp.states_per_layer[1];
        mdp.transition[0].assign(1, std::vector<std::vector<double>>(A, std::vector<double>(S1, 0.0)));
        mdp.transition[0][0][0][S1 - 1] = 1.0;  // absorbing
        for (int a = 1; a < A; ++a) mdp.transition[0][0][a][base.initial_state] = 1.0;
    }

    for (int h = 1; h < H; ++h) {
        const int bh = h - 1;  // base layer
        const int S = mdp.states_per_layer[h];
        const int absorb = S - 1;
        mdp.reward[h].assign(S, std::vector<RewardDist>(A, RewardDist::point(0.0)));
        for (int s = 0; s < absorb; ++s)
            for (int a = 0; a < A; ++a)
                mdp.reward[h][s][a] = base.reward[bh][s][std::min(a, Ab - 1)];
        if (h + 1 < H) {
            const int Sn = mdp.states_per_layer[h + 1];
            mdp.transition[h].assign(S, std::vector<std::vector<double>>(A, std::vector<double>(Sn, 0.0)));
            for (int s = 0; s < absorb; ++s) {
                for (int a = 0; a < A; ++a) {
                    const auto& row = base.transition[bh][s][std::min(a, Ab - 1)];
                    for (std::size_t sp = 0; sp < row.size(); ++sp)
                        mdp.transition[h][s][a][sp] = row[sp];
                }
            }
            for (int a = 0; a < A; ++a) mdp.transition[h][absorb][a][Sn - 1] = 1.0;
        }
    }
    mdp.metadata["kind"] = "reward_probe";
    mdp.validate();
    return mdp;
}

Policy probe_policy_take_reward(const Mdp& probe) {
    Policy pi;
    pi.probs.resize(probe.horizon);
    for (int h = 0; h < probe.horizon; ++h) {
        pi.probs[h].assign(probe.states_per_layer[h],
                           std::vector<double>(probe.num_actions, 0.0));
        for (auto& row : pi.probs[h]) row[0] = 1.0;
    }
    return pi;
}

Policy probe_policy_enter(const Mdp& probe, const Policy& target) {
    Policy pi = probe_policy_take_reward(probe);
    pi.probs[0][0][0] = 0.0;
    pi.probs[0][0][1] = 1.0;
    for (int h = 1; h < probe.horizon; ++h) {
        const int absorb = probe.states_per_layer[h] - 1;
        for (int s = 0; s < absorb; ++s) {
            const auto& row = target.probs[h - 1][s];
            std::fill(pi.probs[h][s].begin(), pi.probs[h][s].end(), 0.0);
            for (std::size_t a = 0; a < row.size(); ++a) pi.probs[h][s][a] = row[a];
        }
    }
    return pi;
}

namespace {

struct StickyLayout {
    int A;
    int R;  // max_repeats
    // layer 0 states are bare base states; later layers are (s, last, cnt)
    int encode(int s, int last, int cnt) const { return (s * A + last) * (R + 1) + cnt; }
    int base_of(int aug) const { return aug / (A * (R + 1)); }
    int last_of(int aug) const { return (aug / (R + 1)) % A; }
    int cnt_of(int aug) const { return aug % (R + 1); }
};

}  // namespace

Mdp sticky_wrap(const Mdp& base, double repeat_prob, int max_repeats) {
    if (repeat_prob < 0.0 || repeat_prob >= 1.0)
        throw std::invalid_argument("sticky_wrap: repeat_prob must be in [0, 1)");
    if (max_repeats < 1) throw std::invalid_argument("sticky_wrap: max_repeats must be >= 1");

    const int H = base.horizon;
    const int A = base.num_actions;
    const StickyLayout lay{A, max_repeats};
    const int aug_per_state = A * (max_repeats + 1);

    Mdp mdp;
    mdp.horizon = H;
    mdp.num_actions = A;
    mdp.initial_state = base.initial_state;
    mdp.r_max = base.r_max;
    mdp.states_per_layer.resize(H);
    mdp.states_per_layer[0] = base.states_per_layer[0];
    for (int h = 1; h < H; ++h) mdp.states_per_layer[h] = base.states_per_layer[h] * aug_per_state;
    mdp.transition.assign(std::max(0, H - 1), {});
    mdp.reward.assign(H, {});

    auto fill_layer = [&](int h) {
        const int S = mdp.states_per_layer[h];
        mdp.reward[h].assign(S, std::vector<RewardDist>(A, RewardDist::point(0.0)));
        if (h + 1 < H) {
            const int Sn = mdp.states_per_layer[h + 1];
            mdp.transition[h].assign(S, std::vector<std::vector<double>>(A, std::vector<double>(Sn, 0.0)));
        }
        for (int aug = 0; aug < S; ++aug) {
            const int s = h == 0 ? aug : lay.base_of(aug);
            const int last = h == 0 ? 0 : lay.last_of(aug);
            const int cnt = h == 0 ? 0 : lay.cnt_of(aug);
            for (int a = 0; a < A; ++a) {
                const double p_rep = (h > 0 && cnt < max_repeats) ? repeat_prob : 0.0;
                mdp.reward[h][aug][a] = mix_rewards({{1.0 - p_rep, base.reward[h][s][a]},
                                                     {p_rep, base.reward[h][s][last]}});
                if (h + 1 < H) {
                    auto& row = mdp.transition[h][aug][a];
                    const auto& chosen = base.transition[h][s][a];
                    for (std::size_t sp = 0; sp < chosen.size(); ++sp)
                        row[lay.encode(static_cast<int>(sp), a, 0)] += (1.0 - p_rep) * chosen[sp];
                    if (p_rep > 0.0) {
                        const auto& forced = base.transition[h][s][last];
                        for (std::size_t sp = 0; sp < forced.size(); ++sp)
                            row[lay.encode(static_cast<int>(sp), last, cnt + 1)] += p_rep * forced[sp];
                    }
                }
            }
        }
    };
    for (int h = 0; h < H; ++h) fill_layer(h);

    mdp.metadata = base.metadata;
    mdp.metadata["kind"] = "sticky_wrapped";
    mdp.metadata["sticky_repeat_prob"] = std::to_string(repeat_prob);
    mdp.metadata["sticky_max_repeats"] = std::to_string(max_repeats);
    mdp.validate();
    return mdp;
}

int sticky_base_state(const Mdp& wrapped, int h, int s) {
    if (h == 0) return s;
    const int R = std::stoi(wrapped.metadata.at("sticky_max_repeats"));
    const StickyLayout lay{wrapped.num_actions, R};
    return lay.base_of(s);
}

Policy lift_policy_sticky(const Mdp& wrapped, const Mdp& base, const Policy& base_policy) {
    (void)base;
    Policy pi;
    pi.probs.resize(wrapped.horizon);
    for (int h = 0; h < wrapped.horizon; ++h) {
        const int S = wrapped.states_per_layer[h];
        pi.probs[h].resize(S);
        for (int s = 0; s < S; ++s)
            pi.probs[h][s] = base_policy.probs[h][sticky_base_state(wrapped, h, s)];
    }
    return pi;
}

// ---- Continuous-state simulators ----

namespace {

class CartpoleLike final : public SimOnlyEnv {
  public:
    CartpoleLike(int horizon, std::uint64_t seed) : horizon_(horizon), rng_(seed) {}

    std::vector<double> reset() override {
        for (double& v : state_) v = (rng_.next_double() - 0.5) * 0.1;
        t_ = 0;
        return {state_.begin(), state_.end()};
    }

    SimStep step(int action) override {
        const double force = action == 1 ? 10.0 : -10.0;
        const double g = 9.8, mc = 1.0, mp = 0.1, len = 0.5, dt = 0.02;
        double x = state_[0], xd = state_[1], th = state_[2], thd = state_[3];
        const double costh = std::cos(th), sinth = std::sin(th);
        const double temp = (force + mp * len * thd * thd * sinth) / (mc + mp);
        const double thacc =
            (g * sinth - costh * temp) / (len * (4.0 / 3.0 - mp * costh * costh / (mc + mp)));
        const double xacc = temp - mp * len * thacc * costh / (mc + mp);
        state_[0] = x + dt * xd;
        state_[1] = xd + dt * xacc;
        state_[2] = th + dt * thd;
        state_[3] = thd + dt * thacc;
        ++t_;
        const bool upright = std::abs(state_[2]) < 0.2095 && std::abs(state_[0]) < 2.4;
        return SimStep{upright ? 1.0 : 0.0, {state_.begin(), state_.end()}, t_ >= horizon_};
    }

    int horizon() const override { return horizon_; }
    int num_actions() const override { return 2; }
    int observation_dim() const override { return 4; }

  private:
    int horizon_;
    Rng rng_;
    std::array<double, 4> state_{};
    int t_ = 0;
};

class AcrobotLike final : public SimOnlyEnv {
  public:
    AcrobotLike(int horizon, std::uint64_t seed) : horizon_(horizon), rng_(seed) {}

    std::vector<double> reset() override {
        for (double& v : state_) v = (rng_.next_double() - 0.5) * 0.2;
        t_ = 0;
        return obs();
    }

    SimStep step(int action) override {
        const double torque = static_cast<double>(action - 1);  // {-1, 0, 1}
        const double g = 9.8, dt = 0.2;
        double th1 = state_[0], th2 = state_[1], d1 = state_[2], d2 = state_[3];
        // simplified two-link dynamics, stable enough for a desk-scale benchmark
        const double dd2 = torque + std::sin(th1 + th2) * g * 0.5 - 0.1 * d2;
        const double dd1 = -std::sin(th1) * g - 0.5 * dd2 - 0.1 * d1;
        state_[2] = std::clamp(d1 + dt * dd1, -4.0 * 3.14159, 4.0 * 3.14159);
        state_[3] = std::clamp(d2 + dt * dd2, -9.0 * 3.14159, 9.0 * 3.14159);
        state_[0] = th1 + dt * state_[2];
        state_[1] = th2 + dt * state_[3];
        ++t_;
        const bool raised = -std::cos(state_[0]) - std::cos(state_[0] + state_[1]) > 1.0;
        return SimStep{raised ? 1.0 : 0.0, obs(), t_ >= horizon_};
    }

    int horizon() const override { return horizon_; }
    int num_actions() const override { return 3; }
    int observation_dim() const override { return 4; }

  private:
    std::vector<double> obs() const { return {state_.begin(), state_.end()}; }
    int horizon_;
    Rng rng_;
    std::array<double, 4> state_{};
    int t_ = 0;
};

}  // namespace

std::unique_ptr<SimOnlyEnv> make_continuous_control(ContinuousKind kind, int horizon,
                                                    std::uint64_t seed) {
    if (horizon > 500) throw std::invalid_argument("make_continuous_control: horizon must be <= 500");
    if (kind == ContinuousKind::cartpole_like)
        return std::make_unique<CartpoleLike>(horizon, seed);
    return std::make_unique<AcrobotLike>(horizon, seed);
}

std::pair<double, double> sim_random_policy_value(SimOnlyEnv& env, int episodes,
                                                  std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < episodes; ++i) {
        env.reset();
        double g = 0.0;
        for (int t = 0; t < env.horizon(); ++t) g += env.step(rng.next_int(env.num_actions())).reward;
        sum += g;
        sumsq += g * g;
    }
    const double mean = sum / episodes;
    const double var = std::max(0.0, sumsq / episodes - mean * mean);
    return {mean, std::sqrt(var / episodes)};
}

}  // namespace opslab
