#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "opslab/mdp.hpp"
#include "opslab/rng.hpp"
#include "opslab/serialize.hpp"
#include "test_util.hpp"

using namespace opslab;

namespace {

Mdp single_chain(int horizon) {
    Mdp mdp;
    mdp.horizon = horizon;
    mdp.num_actions = 1;
    mdp.states_per_layer.assign(horizon, 1);
    mdp.initial_state = 0;
    mdp.r_max = 1.0;
    mdp.transition.assign(horizon - 1,
                          {{std::vector<std::vector<double>>{std::vector<double>{1.0}}}});
    mdp.reward.assign(horizon, {{RewardDist::point(1.0)}});
    mdp.validate();
    return mdp;
}

}  // namespace

TEST_SUITE("mdp") {

TEST_CASE("exact_policy_value on a single-state chain") {
    Mdp mdp = single_chain(3);
    Policy pi = Policy::uniform(mdp);
    CHECK(exact_policy_value(mdp, pi) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("exact_policy_value matches Monte-Carlo on a random MDP") {
    Mdp mdp = testutil::random_mdp(3, 2, 2, 11);
    Policy pi = testutil::random_policy(mdp, 12);
    const double j = exact_policy_value(mdp, pi);
    auto [mc, se] = testutil::monte_carlo_value(mdp, pi, 1000000, 13);
    CHECK(std::abs(mc - j) <= 3.0 * se);
}

TEST_CASE("exact_policy_value rejects undefined policy entries") {
    Mdp mdp = testutil::random_mdp(3, 2, 2, 14);
    Policy pi = testutil::random_policy(mdp, 15);
    pi.probs[1].pop_back();
    CHECK_THROWS_WITH_AS(exact_policy_value(mdp, pi),
                         doctest::Contains("h=1"), std::invalid_argument);
}

TEST_CASE("optimal_q on a single-action MDP equals the only policy's value") {
    Mdp mdp = single_chain(4);
    QFunction qstar = optimal_q(mdp);
    CHECK(qstar.table[0][0][0] == doctest::Approx(exact_policy_value(mdp, Policy::uniform(mdp))));
}

TEST_CASE("optimal_q dominates all deterministic policies") {
    Mdp mdp = testutil::random_mdp(3, 3, 2, 21);
    QFunction qstar = optimal_q(mdp);
    const double vstar = qstar.state_value(0, mdp.initial_state);
    bool attained = false;
    for (const Policy& pi : testutil::enumerate_deterministic_policies(mdp)) {
        const double j = exact_policy_value(mdp, pi);
        CHECK(vstar >= j - 1e-10);
        if (std::abs(j - vstar) < 1e-10) attained = true;
    }
    CHECK(attained);
}

TEST_CASE("greedy policy of q* beats random policies") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Mdp mdp = testutil::random_mdp(4, 4, 3, 100 + seed);
        const double vstar = exact_policy_value(mdp, greedy_policy(optimal_q(mdp)));
        for (int k = 0; k < 100; ++k)
            CHECK(vstar >= exact_policy_value(mdp, testutil::random_policy(mdp, 1000 + k)) - 1e-10);
    }
}

TEST_CASE("exact_bellman_error vanishes at q*") {
    Mdp mdp = testutil::random_mdp(4, 3, 2, 31);
    Policy mu_pi = testutil::random_policy(mdp, 32);
    CHECK(exact_bellman_error(mdp, optimal_q(mdp), occupancy(mdp, mu_pi)) <= 1e-10);
}

TEST_CASE("exact_bellman_error matches brute force and is nonnegative") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Mdp mdp = testutil::random_mdp(2, 2, 2, 40 + seed);
        QFunction q = testutil::random_q(mdp, 50 + seed, 2.0);
        Occupancy mu = occupancy(mdp, testutil::random_policy(mdp, 60 + seed));
        const double e = exact_bellman_error(mdp, q, mu);
        CHECK(e >= 0.0);
        CHECK(e == doctest::Approx(testutil::brute_force_bellman_error(mdp, q, mu)).epsilon(1e-10));
    }
}

TEST_CASE("exact_bellman_error of a scaled q* is positive") {
    Mdp mdp = testutil::random_mdp(3, 3, 2, 71);
    QFunction q = optimal_q(mdp);
    for (auto& layer : q.table)
        for (auto& row : layer)
            for (double& v : row) v *= 100.0;
    Occupancy mu = occupancy(mdp, Policy::uniform(mdp));
    const double e = exact_bellman_error(mdp, q, mu);
    CHECK(e > 1.0);
    CHECK(e == doctest::Approx(testutil::brute_force_bellman_error(mdp, q, mu)).epsilon(1e-10));
}

TEST_CASE("exact_bellman_error rejects unnormalized mu") {
    Mdp mdp = testutil::random_mdp(3, 2, 2, 81);
    Occupancy mu = occupancy(mdp, Policy::uniform(mdp));
    mu[1][0][0] += 0.5;
    CHECK_THROWS_AS(exact_bellman_error(mdp, optimal_q(mdp), mu), std::invalid_argument);
}

TEST_CASE("sample_trajectories is deterministic and shape-correct") {
    Mdp mdp = testutil::random_mdp(3, 3, 2, 91);
    Policy pi = testutil::random_policy(mdp, 92);
    Dataset d1 = sample_trajectories(mdp, pi, 200, 7);
    Dataset d2 = sample_trajectories(mdp, pi, 200, 7);
    d1.validate();
    REQUIRE(d1.trajectories.size() == 200);
    for (std::size_t i = 0; i < d1.trajectories.size(); ++i) {
        for (int h = 0; h < mdp.horizon; ++h) {
            const Step& a = d1.trajectories[i].steps[h];
            const Step& b = d2.trajectories[i].steps[h];
            CHECK(a.s == b.s);
            CHECK(a.a == b.a);
            CHECK(a.r == b.r);
            CHECK(a.sp == b.sp);
            CHECK(a.pb == b.pb);
        }
    }
}

TEST_CASE("sample_trajectories deterministic MDP and policy give identical episodes") {
    Mdp mdp = single_chain(3);
    Dataset data = sample_trajectories(mdp, Policy::uniform(mdp), 50, 3);
    for (const auto& traj : data.trajectories) CHECK(traj.ret() == doctest::Approx(3.0));
}

TEST_CASE("sample_trajectories layer-0 action frequencies match the policy") {
    Mdp mdp = testutil::random_mdp(2, 2, 3, 95);
    Policy pi = testutil::random_policy(mdp, 96);
    const int n = 100000;
    Dataset data = sample_trajectories(mdp, pi, n, 97);
    std::vector<int> counts(mdp.num_actions, 0);
    for (const auto& traj : data.trajectories) counts[traj.steps[0].a]++;
    for (int a = 0; a < mdp.num_actions; ++a) {
        const double p = pi.probs[0][mdp.initial_state][a];
        const double se = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(static_cast<double>(counts[a]) / n - p) <= 3.0 * se + 1e-9);
    }
}

TEST_CASE("occupancy layer 0 equals the initial action distribution") {
    Mdp mdp = testutil::random_mdp(3, 3, 2, 101);
    Policy pi = testutil::random_policy(mdp, 102);
    Occupancy occ = occupancy(mdp, pi);
    for (int a = 0; a < mdp.num_actions; ++a)
        CHECK(occ[0][mdp.initial_state][a] ==
              doctest::Approx(pi.probs[0][mdp.initial_state][a]).epsilon(1e-14));
}

TEST_CASE("occupancy sums to one per layer and matches Monte-Carlo") {
    Mdp mdp = testutil::random_mdp(3, 2, 2, 111);
    Policy pi = testutil::random_policy(mdp, 112);
    Occupancy occ = occupancy(mdp, pi);
    for (int h = 0; h < mdp.horizon; ++h) {
        double total = 0.0;
        for (const auto& row : occ[h])
            for (double p : row) total += p;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    const int n = 1000000;
    Dataset data = sample_trajectories(mdp, pi, n, 113);
    Occupancy emp = empirical_occupancy(mdp, data);
    for (int h = 0; h < mdp.horizon; ++h)
        for (int s = 0; s < mdp.states_per_layer[h]; ++s)
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double p = occ[h][s][a];
                const double se = std::sqrt(p * (1 - p) / n);
                CHECK(std::abs(emp[h][s][a] - p) <= 3.0 * se + 1e-9);
            }
}

TEST_CASE("occupancy telescoping reproduces J(pi)") {
    Mdp mdp = testutil::random_mdp(4, 3, 3, 121);
    Policy pi = testutil::random_policy(mdp, 122);
    Occupancy occ = occupancy(mdp, pi);
    double j = 0.0;
    for (int h = 0; h < mdp.horizon; ++h)
        for (int s = 0; s < mdp.states_per_layer[h]; ++s)
            for (int a = 0; a < mdp.num_actions; ++a)
                j += occ[h][s][a] * mdp.mean_reward(h, s, a);
    CHECK(j == doctest::Approx(exact_policy_value(mdp, pi)).epsilon(1e-10));
}

TEST_CASE("concentration_coefficient basics") {
    Mdp mdp = testutil::random_mdp(3, 3, 2, 131);
    Policy pi = testutil::random_policy(mdp, 132);
    SUBCASE("own occupancy gives C = 1") {
        CHECK(concentration_coefficient(mdp, {pi}, occupancy(mdp, pi)) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("mixture occupancy bounds C by K") {
        const int K = 4;
        std::vector<Policy> pis;
        for (int k = 0; k < K; ++k) pis.push_back(testutil::random_policy(mdp, 140 + k));
        Occupancy mu = occupancy(mdp, pis[0]);
        for (int k = 1; k < K; ++k) {
            Occupancy o = occupancy(mdp, pis[k]);
            for (int h = 0; h < mdp.horizon; ++h)
                for (int s = 0; s < mdp.states_per_layer[h]; ++s)
                    for (int a = 0; a < mdp.num_actions; ++a) mu[h][s][a] += o[h][s][a];
        }
        for (auto& layer : mu)
            for (auto& row : layer)
                for (double& p : row) p /= K;
        const double c = concentration_coefficient(mdp, pis, mu);
        CHECK(c >= 1.0);
        CHECK(c <= K + 1e-9);
    }
    SUBCASE("uncovered support signals infinite coverage") {
        Occupancy mu = occupancy(mdp, pi);
        mu[1][0] = std::vector<double>(mdp.num_actions, 0.0);
        // renormalize the rest of the layer
        double total = 0.0;
        for (const auto& row : mu[1])
            for (double p : row) total += p;
        for (auto& row : mu[1])
            for (double& p : row) p /= total;
        CHECK(std::isinf(concentration_coefficient(mdp, {Policy::uniform(mdp)}, mu)));
    }
}

TEST_CASE("value gap bounded by 2H sqrt(C E) with exact quantities") {
    // J(pi*) - J(greedy(q)) <= 2 H sqrt(C * E(q)) with C covering greedy(q) and pi*.
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Mdp mdp = testutil::random_mdp(3, 3, 2, 200 + seed);
        QFunction q = testutil::random_q(mdp, 300 + seed, 1.5);
        Policy pi_q = greedy_policy(q);
        Policy pi_star = greedy_policy(optimal_q(mdp));
        Occupancy mu = occupancy(mdp, Policy::uniform(mdp));
        const double c = concentration_coefficient(mdp, {pi_q, pi_star}, mu);
        REQUIRE(std::isfinite(c));
        const double gap = exact_policy_value(mdp, pi_star) - exact_policy_value(mdp, pi_q);
        const double bound =
            2.0 * mdp.horizon * std::sqrt(c * exact_bellman_error(mdp, q, mu));
        CHECK(gap <= bound + 1e-10);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("mdp and dataset serialization round-trips") {
    Mdp mdp = testutil::random_mdp(3, 2, 2, 400);
    const std::string text = mdp_to_json(mdp);
    Mdp back = mdp_from_json(text);
    CHECK(mdp_to_json(back) == text);

    Policy pi = testutil::random_policy(mdp, 401);
    CHECK(policy_to_json(policy_from_json(policy_to_json(pi))) == policy_to_json(pi));

    Dataset data = sample_trajectories(mdp, pi, 20, 402);
    const std::string path = "test_dataset_roundtrip.jsonl";
    save_dataset(data, path);
    Dataset loaded = load_dataset(path);
    REQUIRE(loaded.trajectories.size() == data.trajectories.size());
    save_dataset(loaded, path + ".2");
    std::ifstream f1(path), f2(path + ".2");
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    std::remove(path.c_str());
    std::remove((path + ".2").c_str());
}

}  // TEST_SUITE
