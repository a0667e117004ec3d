#include <doctest.h>

#include <cmath>
#include <set>

#include "opslab/candidates.hpp"
#include "opslab/env.hpp"
#include "opslab/rng.hpp"
#include "opslab/serialize.hpp"
#include "test_util.hpp"

using namespace opslab;

namespace {

Mdp small_grid() {
    GridworldParams p;
    p.width = 2;
    p.height = 2;
    p.horizon = 4;
    p.slip_prob = 0.0;
    return make_gridworld(p);
}

std::set<std::tuple<int, int, int>> visited_cells(const Dataset& data) {
    std::set<std::tuple<int, int, int>> cells;
    for (const auto& traj : data.trajectories)
        for (const auto& st : traj.steps) cells.insert({st.h, st.s, st.a});
    return cells;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
    if (a.trajectories.size() != b.trajectories.size()) return false;
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
        const auto& ta = a.trajectories[i].steps;
        const auto& tb = b.trajectories[i].steps;
        if (ta.size() != tb.size()) return false;
        for (std::size_t j = 0; j < ta.size(); ++j)
            if (ta[j].h != tb[j].h || ta[j].s != tb[j].s || ta[j].a != tb[j].a ||
                ta[j].r != tb[j].r || ta[j].sp != tb[j].sp || ta[j].pb != tb[j].pb)
                return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("candidates") {

TEST_CASE("plain tabular FQI recovers q* on covered cells of a deterministic gridworld") {
    const Mdp mdp = small_grid();
    const Dataset data = sample_trajectories(mdp, Policy::uniform(mdp), 600, 3);
    TrainConfig cfg;
    cfg.class_name = "tabular";
    cfg.conservative_alpha = 0.0;
    cfg.iterations = mdp.horizon;
    const TrainedCandidate cand = train_conservative_fqi(mdp, data, cfg);
    const QFunction qstar = optimal_q(mdp);

    const auto cells = visited_cells(data);
    CHECK(cells.size() >= 40);  // 2x2 grid: broad coverage under uniform actions
    for (const auto& [h, s, a] : cells)
        CHECK(std::abs(cand.q.value(h, s, a) - qstar.value(h, s, a)) <= 1e-6);
    CHECK_FALSE(cand.diverged);
}

TEST_CASE("large alpha pushes greedy actions onto the data support") {
    const Mdp mdp = small_grid();
    // behavior that never plays actions 2 and 3
    Policy narrow = Policy::uniform(mdp);
    for (auto& layer : narrow.probs)
        for (auto& row : layer) row = {0.5, 0.5, 0.0, 0.0};
    const Dataset data = sample_trajectories(mdp, narrow, 400, 4);

    TrainConfig cfg;
    cfg.class_name = "tabular";
    cfg.learning_rate = 0.001;
    cfg.conservative_alpha = 1000.0;
    cfg.iterations = 100;
    const TrainedCandidate cand = train_conservative_fqi(mdp, data, cfg);

    std::set<std::tuple<int, int, int>> support = visited_cells(data);
    std::set<std::pair<int, int>> states;
    for (const auto& [h, s, a] : support) states.insert({h, s});
    int supported = 0;
    for (const auto& [h, s] : states) {
        int best = 0;
        for (int a = 1; a < mdp.num_actions; ++a)
            if (cand.q.value(h, s, a) > cand.q.value(h, s, best)) best = a;
        if (support.count({h, s, best})) ++supported;
    }
    CHECK(static_cast<double>(supported) >= 0.99 * static_cast<double>(states.size()));
}

TEST_CASE("mean q over data is non-increasing in alpha") {
    const Mdp mdp = small_grid();
    Policy narrow = Policy::uniform(mdp);
    for (auto& layer : narrow.probs)
        for (auto& row : layer) row = {0.4, 0.4, 0.1, 0.1};
    const Dataset data = sample_trajectories(mdp, narrow, 300, 5);

    const std::vector<double> alphas{1.0, 0.1, 0.01, 0.001, 0.0};
    std::vector<double> means;
    for (double alpha : alphas) {
        TrainConfig cfg;
        cfg.class_name = "tabular";
        cfg.conservative_alpha = alpha;
        cfg.iterations = 100;
        const TrainedCandidate cand = train_conservative_fqi(mdp, data, cfg);
        double total = 0.0;
        for (const auto& traj : data.trajectories)
            for (const auto& st : traj.steps) total += cand.q.value(st.h, st.s, st.a);
        means.push_back(total / static_cast<double>(data.num_transitions()));
    }
    // alphas are listed descending, so means must ascend toward alpha = 0
    for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i - 1] <= means[i] + 1e-12);
}

TEST_CASE("grid sizes and diversity") {
    const Mdp mdp = small_grid();
    const Dataset data = sample_trajectories(mdp, Policy::uniform(mdp), 150, 6);

    SUBCASE("single-point grid trains one candidate") {
        GridAxes axes;
        axes.learning_rates = {0.001};
        axes.class_names = {"tabular"};
        axes.alphas = {0.0};
        axes.iterations = {20};
        const CandidateSet set = build_candidate_grid(mdp, data, axes, 9);
        CHECK(set.entries.size() == 1);
    }
    SUBCASE("default grid yields 90 candidates with at least two distinct policies") {
        GridAxes axes;
        CHECK(axes.size() == 90);
        axes.iterations = {5, 20};  // trimmed budget, same grid shape
        const CandidateSet set = build_candidate_grid(mdp, data, axes, 9);
        CHECK(set.entries.size() == 90);
        std::set<std::vector<std::vector<std::vector<double>>>> distinct;
        for (const auto& entry : set.entries) distinct.insert(entry.policy.probs);
        CHECK(distinct.size() >= 2);
        // per-entry seeds derive from (master, index)
        CHECK(set.entries[0].train_seed == derive_seed(9, 0));
        CHECK(set.entries[1].train_seed == derive_seed(9, 1));
    }
    SUBCASE("every entry's policy is exactly greedy in its q") {
        GridAxes axes;
        axes.learning_rates = {0.001};
        axes.alphas = {0.1, 0.0};
        axes.iterations = {10};
        const CandidateSet set = build_candidate_grid(mdp, data, axes, 11);
        for (const auto& entry : set.entries) {
            const Policy g = greedy_policy(entry.q);
            CHECK(g.probs == entry.policy.probs);
        }
    }
}

TEST_CASE("all-zero-alpha tabular grid reaches optimal value") {
    const Mdp mdp = small_grid();
    const Dataset data = sample_trajectories(mdp, Policy::uniform(mdp), 600, 12);
    GridAxes axes;
    axes.class_names = {"tabular"};
    axes.alphas = {0.0};
    axes.iterations = {200};
    const CandidateSet set = build_candidate_grid(mdp, data, axes, 13);
    const double jstar = exact_policy_value(mdp, greedy_policy(optimal_q(mdp)));
    for (const auto& entry : set.entries)
        CHECK(std::abs(exact_policy_value(mdp, entry.policy) - jstar) <= 1e-6);
}

TEST_CASE("linear classes train and stay finite on covered data") {
    const Mdp mdp = small_grid();
    const Dataset data = sample_trajectories(mdp, Policy::uniform(mdp), 400, 14);
    for (const std::string& name : {std::string("linear-fine"), std::string("linear-coarse")}) {
        TrainConfig cfg;
        cfg.class_name = name;
        cfg.conservative_alpha = 0.01;
        cfg.iterations = 50;
        const TrainedCandidate cand = train_conservative_fqi(mdp, data, cfg);
        CHECK_FALSE(cand.diverged);
        for (int h = 0; h < mdp.horizon; ++h)
            for (int s = 0; s < mdp.states_per_layer[h]; ++s)
                for (int a = 0; a < mdp.num_actions; ++a)
                    CHECK(std::isfinite(cand.q.value(h, s, a)));
    }
}

TEST_CASE("epsilon_greedy mixes toward uniform") {
    const Mdp mdp = small_grid();
    Policy det = Policy::uniform(mdp);
    for (auto& layer : det.probs)
        for (auto& row : layer) row = {1.0, 0.0, 0.0, 0.0};

    SUBCASE("eps = 0 is the identity") {
        CHECK(epsilon_greedy(det, 0.0).probs == det.probs);
    }
    SUBCASE("eps = 1 is uniform") {
        const Policy u = epsilon_greedy(det, 1.0);
        for (const auto& layer : u.probs)
            for (const auto& row : layer)
                for (double p : row) CHECK(p == doctest::Approx(0.25));
    }
    SUBCASE("eps = 0.4 with A = 4 gives 0.7 / 0.1") {
        const Policy e = epsilon_greedy(det, 0.4);
        CHECK(e.probs[0][0][0] == doctest::Approx(0.7));
        CHECK(e.probs[0][0][1] == doctest::Approx(0.1));
    }
    SUBCASE("out-of-range eps rejected") {
        CHECK_THROWS_AS(epsilon_greedy(det, -0.1), std::invalid_argument);
        CHECK_THROWS_AS(epsilon_greedy(det, 1.5), std::invalid_argument);
    }
}

TEST_CASE("mixture_policy combines action distributions") {
    const Mdp mdp = small_grid();
    Policy a = Policy::uniform(mdp), b = Policy::uniform(mdp);
    for (auto& layer : a.probs)
        for (auto& row : layer) row = {1.0, 0.0, 0.0, 0.0};
    for (auto& layer : b.probs)
        for (auto& row : layer) row = {0.0, 1.0, 0.0, 0.0};

    SUBCASE("single policy is unchanged") {
        CHECK(mixture_policy({a}, {1.0}).probs == a.probs);
    }
    SUBCASE("equal-weight disagreement splits 0.5 / 0.5") {
        const Policy m = mixture_policy({a, b}, {0.5, 0.5});
        CHECK(m.probs[1][2][0] == doctest::Approx(0.5));
        CHECK(m.probs[1][2][1] == doctest::Approx(0.5));
        CHECK(m.probs[1][2][2] == doctest::Approx(0.0));
    }
    SUBCASE("unnormalized weights rejected") {
        CHECK_THROWS_AS(mixture_policy({a, b}, {0.5, 0.6}), std::invalid_argument);
    }
    SUBCASE("mixture occupancy covers every component within factor K") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const Mdp m = testutil::random_mdp(3, 3, 2, 100 + seed);
            std::vector<Policy> pis;
            const int K = 4;
            for (int k = 0; k < K; ++k)
                pis.push_back(testutil::random_policy(m, derive_seed(seed, k)));
            const Policy mix = mixture_policy(pis, std::vector<double>(K, 1.0 / K));
            const double c = concentration_coefficient(m, pis, occupancy(m, mix));
            CHECK(c <= K + 1e-9);
        }
    }
}

TEST_CASE("make_ops_dataset regimes") {
    const Mdp mdp = small_grid();
    const Dataset train = sample_trajectories(mdp, Policy::uniform(mdp), 150, 20);
    GridAxes axes;
    axes.learning_rates = {0.001};
    axes.class_names = {"tabular"};
    axes.alphas = {0.1, 0.0};
    axes.iterations = {10};
    const CandidateSet set = build_candidate_grid(mdp, train, axes, 21);

    SUBCASE("single candidate: recorded pb matches that policy") {
        CandidateSet one;
        one.entries.push_back(set.entries[0]);
        const Dataset d = make_ops_dataset(mdp, one, Regime::well_covered, 50, 22);
        for (const auto& traj : d.trajectories)
            for (const auto& st : traj.steps)
                CHECK(st.pb == one.entries[0].policy.prob(st.h, st.s, st.a));
    }
    SUBCASE("plus-optimal regime shows the optimal layer-0 action often enough") {
        const int n = 4000;
        const Dataset d =
            make_ops_dataset(mdp, set, Regime::well_covered_plus_optimal, n, 23);
        const Policy opt = greedy_policy(optimal_q(mdp));
        int a_opt = 0;
        for (int a = 1; a < mdp.num_actions; ++a)
            if (opt.probs[0][mdp.initial_state][a] > 0.5) a_opt = a;
        int hits = 0;
        for (const auto& traj : d.trajectories)
            if (traj.steps[0].a == a_opt) ++hits;
        const double k = static_cast<double>(set.entries.size());
        const double p_floor = (1.0 / (k + 1.0)) * 0.6;
        const double sigma = std::sqrt(p_floor * (1 - p_floor) / n);
        CHECK(static_cast<double>(hits) / n >= p_floor - 3 * sigma);
    }
    SUBCASE("fixed seed reproduces the dataset exactly") {
        const Dataset d1 = make_ops_dataset(mdp, set, Regime::well_covered, 80, 24);
        const Dataset d2 = make_ops_dataset(mdp, set, Regime::well_covered, 80, 24);
        CHECK(same_dataset(d1, d2));
    }
    SUBCASE("regime names round-trip") {
        CHECK(regime_from_string("well_covered") == Regime::well_covered);
        CHECK(regime_to_string(Regime::well_covered_plus_optimal) ==
              "well_covered_plus_optimal");
        CHECK_THROWS_AS(regime_from_string("bogus"), std::invalid_argument);
    }
}

TEST_CASE("candidate set serialization round-trips") {
    const Mdp mdp = small_grid();
    const Dataset train = sample_trajectories(mdp, Policy::uniform(mdp), 100, 30);
    GridAxes axes;
    axes.learning_rates = {0.001};
    axes.class_names = {"tabular", "linear-coarse"};
    axes.alphas = {0.1};
    axes.iterations = {10};
    const CandidateSet set = build_candidate_grid(mdp, train, axes, 31);
    const CandidateSet back = candidate_set_from_json(candidate_set_to_json(set));
    REQUIRE(back.entries.size() == set.entries.size());
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        CHECK(back.entries[i].policy.probs == set.entries[i].policy.probs);
        CHECK(back.entries[i].q.table == set.entries[i].q.table);
        CHECK(back.entries[i].hyperparams == set.entries[i].hyperparams);
        CHECK(back.entries[i].train_seed == set.entries[i].train_seed);
        CHECK(back.entries[i].diverged == set.entries[i].diverged);
    }
    CHECK(back.provenance == set.provenance);
}

}  // TEST_SUITE
