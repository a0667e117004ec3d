#include <doctest.h>

#include <cmath>

#include "opslab/env.hpp"
#include "opslab/mdp.hpp"
#include "test_util.hpp"

using namespace opslab;

namespace {

// Second, independent DP route for gridworlds: value iteration over (h, cell)
// written directly against the move/slip semantics, not the Mdp tensors.
double gridworld_optimal_value_direct(const GridworldParams& p) {
    const int W = p.width, Ht = p.height, cells = W * Ht;
    std::vector<double> layout = p.reward_layout;
    if (layout.empty()) {
        layout.assign(cells, 0.0);
        layout[cells - 1] = 1.0;
    }
    auto dest = [&](int cell, int move) {
        const int x = cell % W, y = cell / W;
        if (move == 0) return y > 0 ? cell - W : cell;
        if (move == 1) return y + 1 < Ht ? cell + W : cell;
        if (move == 2) return x > 0 ? cell - 1 : cell;
        return x + 1 < W ? cell + 1 : cell;
    };
    std::vector<double> v(cells, 0.0);
    for (int h = p.horizon - 1; h >= 0; --h) {
        std::vector<double> nv(cells, 0.0);
        for (int s = 0; s < cells; ++s) {
            double best = -1.0;
            for (int a = 0; a < 4; ++a) {
                double qa = 0.0;
                for (int m = 0; m < 4; ++m) {
                    const double pm = p.slip_prob / 4 + (m == a ? 1.0 - p.slip_prob : 0.0);
                    if (pm == 0.0) continue;
                    const int d = dest(s, m);
                    qa += pm * (layout[d] + (h + 1 < p.horizon ? v[d] : 0.0));
                }
                best = std::max(best, qa);
            }
            nv[s] = best;
        }
        v = std::move(nv);
    }
    return v[0];
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("gridworld with slip 0 is deterministic") {
    GridworldParams p;
    p.slip_prob = 0.0;
    Mdp mdp = make_gridworld(p);
    for (int h = 0; h + 1 < mdp.horizon; ++h)
        for (const auto& srow : mdp.transition[h])
            for (const auto& arow : srow) {
                int nonzero = 0;
                for (double x : arow)
                    if (x != 0.0) ++nonzero;
                CHECK(nonzero == 1);
            }
}

TEST_CASE("gridworld optimal value matches an independent DP") {
    GridworldParams p;
    p.width = 3;
    p.height = 3;
    p.horizon = 6;
    p.slip_prob = 0.1;
    Mdp mdp = make_gridworld(p);
    const double v = optimal_q(mdp).state_value(0, mdp.initial_state);
    CHECK(v == doctest::Approx(gridworld_optimal_value_direct(p)).epsilon(1e-12));
}

TEST_CASE("gridworld all-zero layout gives zero value for every policy") {
    GridworldParams p;
    p.reward_layout.assign(9, 0.0);
    Mdp mdp = make_gridworld(p);
    for (int k = 0; k < 5; ++k)
        CHECK(exact_policy_value(mdp, testutil::random_policy(mdp, k)) ==
              doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gridworld flags unreachable goals") {
    GridworldParams p;
    p.width = 5;
    p.height = 5;
    p.horizon = 2;  // goal is 8 moves away
    Mdp mdp = make_gridworld(p);
    CHECK(mdp.metadata.count("goal_unreachable") == 1);
}

TEST_CASE("tree-hard pair: values, terminal means, deviations") {
    auto [m1, m2] = make_tree_hard(2, 2, 0.25);
    Policy target = tree_hard_on_path_policy(m1);
    CHECK(exact_policy_value(m1, target) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(exact_policy_value(m2, target) == doctest::Approx(0.0).epsilon(1e-14));
    // MDPs differ only in the terminal reward distribution
    CHECK(m1.transition == m2.transition);
    CHECK(m2.reward[1][0][0].mean() == doctest::Approx(0.0));

    // any deviation from the on-path action yields value 0 in both
    Policy dev = target;
    dev.probs[0][0] = {0.0, 1.0};
    CHECK(exact_policy_value(m1, dev) == doctest::Approx(0.0));
    CHECK(exact_policy_value(m2, dev) == doctest::Approx(0.0));
}

TEST_CASE("tree-hard honors argmin behavior action with lowest-id ties") {
    auto [m1u, m2u] = make_tree_hard(3, 3, 0.1);
    (void)m2u;
    Policy target = tree_hard_on_path_policy(m1u);
    for (int h = 0; h < 3; ++h) CHECK(target.probs[h][0][0] == 1.0);  // uniform -> lowest id

    Policy skew;
    skew.probs = {{{0.5, 0.3, 0.2}}, {{0.2, 0.5, 0.3}, {0.2, 0.5, 0.3}},
                  {{0.4, 0.4, 0.2}, {0.4, 0.4, 0.2}}};
    auto [m1, m2] = make_tree_hard(3, 3, 0.1, &skew);
    (void)m2;
    Policy path = tree_hard_on_path_policy(m1);
    CHECK(path.probs[0][0][2] == 1.0);
    CHECK(path.probs[1][0][0] == 1.0);
    CHECK(path.probs[2][0][2] == 1.0);
    CHECK(exact_policy_value(m1, path) == doctest::Approx(0.5));
}

TEST_CASE("tree-hard reach probability under uniform behavior is A^-H") {
    const int A = 2, H = 3;
    auto [m1, m2] = make_tree_hard(A, H, 0.2);
    (void)m2;
    Occupancy occ = occupancy(m1, Policy::uniform(m1));
    // occupancy of the on-path node at layer h equals A^-h; the terminal
    // (state, action) pair has probability A^-H
    for (int h = 0; h < H; ++h) {
        double node = 0.0;
        for (int a = 0; a < A; ++a) node += occ[h][0][a];
        CHECK(node == doctest::Approx(std::pow(A, -h)).epsilon(1e-12));
    }
    CHECK(occ[H - 1][0][0] == doctest::Approx(std::pow(A, -H)).epsilon(1e-12));
}

TEST_CASE("tree-hard rejects out-of-range eps") {
    CHECK_THROWS_AS(make_tree_hard(2, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_tree_hard(2, 2, 0.4), std::invalid_argument);
}

TEST_CASE("reward probe value identities") {
    auto [base, m2] = make_tree_hard(2, 3, 0.25);
    (void)m2;
    Policy target = tree_hard_on_path_policy(base);

    SUBCASE("r = 0 makes the take-reward policy worthless") {
        Mdp probe = make_reward_probe(base, 0.0);
        CHECK(exact_policy_value(probe, probe_policy_take_reward(probe)) == doctest::Approx(0.0));
    }
    SUBCASE("r = 0.3 yields exact values (0.3, 0.5)") {
        Mdp probe = make_reward_probe(base, 0.3);
        CHECK(exact_policy_value(probe, probe_policy_take_reward(probe)) == doctest::Approx(0.3));
        CHECK(exact_policy_value(probe, probe_policy_enter(probe, target)) == doctest::Approx(0.5));
    }
    SUBCASE("r = V_max makes taking the reward optimal") {
        Mdp probe = make_reward_probe(base, base.v_max());
        const double v1 = exact_policy_value(probe, probe_policy_take_reward(probe));
        CHECK(v1 == doctest::Approx(base.v_max()));
        CHECK(v1 >= exact_policy_value(probe, probe_policy_enter(probe, target)));
    }
    SUBCASE("identities hold on a grid of r values") {
        const double jm = exact_policy_value(base, target);
        for (double r : {0.0, 0.1, 0.25, 0.5, 1.0, 1.7}) {
            Mdp probe = make_reward_probe(base, r);
            CHECK(exact_policy_value(probe, probe_policy_take_reward(probe)) ==
                  doctest::Approx(r).epsilon(1e-12));
            CHECK(exact_policy_value(probe, probe_policy_enter(probe, target)) ==
                  doctest::Approx(jm).epsilon(1e-12));
        }
    }
    SUBCASE("r out of range is rejected") {
        CHECK_THROWS_AS(make_reward_probe(base, -0.1), std::invalid_argument);
        CHECK_THROWS_AS(make_reward_probe(base, base.v_max() + 1.0), std::invalid_argument);
    }
}

TEST_CASE("sticky wrap with repeat_prob 0 preserves every policy value") {
    GridworldParams p;
    p.slip_prob = 0.0;
    p.horizon = 4;
    Mdp base = make_gridworld(p);
    Mdp wrapped = sticky_wrap(base, 0.0, 4);
    for (int k = 0; k < 10; ++k) {
        Policy pi = testutil::random_policy(base, 500 + k);
        CHECK(exact_policy_value(wrapped, lift_policy_sticky(wrapped, base, pi)) ==
              doctest::Approx(exact_policy_value(base, pi)).epsilon(1e-12));
    }
}

TEST_CASE("sticky wrap defaults change values; DP matches Monte-Carlo") {
    GridworldParams p;
    p.slip_prob = 0.0;
    p.horizon = 5;
    Mdp base = make_gridworld(p);
    Mdp wrapped = sticky_wrap(base, 0.25, 4);
    Policy base_pi = greedy_policy(optimal_q(base));
    Policy pi = lift_policy_sticky(wrapped, base, base_pi);
    const double j_base = exact_policy_value(base, base_pi);
    const double j_wrapped = exact_policy_value(wrapped, pi);
    CHECK(j_wrapped != doctest::Approx(j_base).epsilon(1e-6));
    auto [mc, se] = testutil::monte_carlo_value(wrapped, pi, 200000, 11);
    CHECK(std::abs(mc - j_wrapped) <= 3.0 * se);
}

TEST_CASE("sticky wrap max_repeats=1 forces at most one consecutive repeat") {
    GridworldParams p;
    p.horizon = 6;
    Mdp base = make_gridworld(p);
    Mdp wrapped = sticky_wrap(base, 0.5, 1);
    Policy pi = lift_policy_sticky(wrapped, base, Policy::uniform(base));
    Dataset data = sample_trajectories(wrapped, pi, 10000, 17);
    // repeat count is the low component of the augmented state id
    auto cnt_of = [](int aug) { return aug % 2; };
    bool saw_repeat = false;
    for (const auto& traj : data.trajectories)
        for (int h = 1; h < wrapped.horizon; ++h) {
            const int cnt = cnt_of(traj.steps[h].s);
            if (cnt == 1) {
                saw_repeat = true;
                // a forced repeat can never be followed by another one
                if (h + 1 < wrapped.horizon) CHECK(cnt_of(traj.steps[h + 1].s) == 0);
            }
        }
    CHECK(saw_repeat);
}

TEST_CASE("continuous control simulators") {
    SUBCASE("determinism for a fixed seed and action sequence") {
        for (ContinuousKind kind : {ContinuousKind::cartpole_like, ContinuousKind::acrobot_like}) {
            auto e1 = make_continuous_control(kind, 50, 42);
            auto e2 = make_continuous_control(kind, 50, 42);
            auto o1 = e1->reset();
            auto o2 = e2->reset();
            CHECK(o1 == o2);
            for (int t = 0; t < 50; ++t) {
                SimStep s1 = e1->step(t % e1->num_actions());
                SimStep s2 = e2->step(t % e2->num_actions());
                CHECK(s1.observation == s2.observation);
                CHECK(s1.reward == s2.reward);
                CHECK(s1.done == (t == 49));
            }
        }
    }
    SUBCASE("random-policy Monte-Carlo value with standard error; rewards in bounds") {
        auto env = make_continuous_control(ContinuousKind::cartpole_like, 100, 7);
        auto [mean, se] = sim_random_policy_value(*env, 10000, 8);
        CHECK(mean >= 0.0);
        CHECK(mean <= 100.0);
        CHECK(se > 0.0);
        env->reset();
        for (int t = 0; t < 100; ++t) {
            const double r = env->step(t % 2).reward;
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
    }
    SUBCASE("horizon cap") {
        CHECK_THROWS_AS(make_continuous_control(ContinuousKind::cartpole_like, 501, 0),
                        std::invalid_argument);
    }
}

}  // TEST_SUITE
