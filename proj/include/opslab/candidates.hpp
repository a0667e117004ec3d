#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "opslab/func_approx.hpp"
#include "opslab/mdp.hpp"

namespace opslab {

// Candidate (policy, Q) generation: conservative fitted Q-iteration over a
// hyperparameter grid, behavior-policy constructors, and OPS dataset
// generation for the two coverage regimes.

struct TrainConfig {
    double learning_rate = 0.001;
    std::string class_name = "tabular";  // tabular | linear-coarse | linear-fine
    double conservative_alpha = 0.0;
    int iterations = 100;
    std::uint64_t seed = 0;
};

struct TrainedCandidate {
    Policy policy;
    QFunction q;
    std::map<std::string, std::string> hyperparams;
    std::uint64_t train_seed = 0;
    bool diverged = false;
};

struct CandidateSet {
    std::vector<TrainedCandidate> entries;
    std::string provenance;
};

struct GridAxes {
    std::vector<double> learning_rates{0.001, 0.0003, 0.0001};
    std::vector<std::string> class_names{"tabular", "linear-coarse", "linear-fine"};
    std::vector<double> alphas{1.0, 0.1, 0.01, 0.001, 0.0};
    std::vector<int> iterations{100, 200};

    std::size_t size() const {
        return learning_rates.size() * class_names.size() * alphas.size() * iterations.size();
    }
};

// Fitted Q-iteration with a conservative penalty. Each iteration refits the
// class to TD targets r + v_q(s'), then takes one penalty gradient step of
// size learning_rate * alpha on the loss term
//   mean over data of (log sum_a exp q(s,a) - q(s, a_data)).
// The penalty accumulates across iterations in the class's own parameter
// space (table entries or linear weights). alpha = 0 is plain FQI. The
// returned policy is greedy in the final q, ties toward the lowest action.
// Any |q| > 10 * V_max marks the entry diverged (kept, flagged).
TrainedCandidate train_conservative_fqi(const Mdp& mdp, const Dataset& data,
                                        const TrainConfig& cfg);

// Cartesian product of the axes; per-entry seed = derive_seed(master, index).
// |entries| = product of axis sizes (default grid: 90).
CandidateSet build_candidate_grid(const Mdp& mdp, const Dataset& data, const GridAxes& grid,
                                  std::uint64_t master_seed);

// (1 - eps) * base + eps * uniform.
Policy epsilon_greedy(const Policy& base, double eps);

// Per-(h, s) convex combination of action distributions.
Policy mixture_policy(const std::vector<Policy>& policies, const std::vector<double>& weights);

// Per-episode mixture: one component is drawn per episode and acts for the
// whole trajectory; recorded pb is the acting component's probability.
Dataset sample_mixture_trajectories(const Mdp& mdp, const std::vector<Policy>& policies,
                                    const std::vector<double>& weights, int n,
                                    std::uint64_t seed);

enum class Regime { well_covered, well_covered_plus_optimal };

Regime regime_from_string(const std::string& name);
std::string regime_to_string(Regime regime);

// Regime well_covered: equal-weight per-episode mixture of candidate
// policies. Regime well_covered_plus_optimal: the same mixture extended with
// eps-greedy(greedy(q*), 0.4).
Dataset make_ops_dataset(const Mdp& mdp, const CandidateSet& candidates, Regime regime, int n,
                         std::uint64_t seed);

std::string candidate_set_to_json(const CandidateSet& set);
CandidateSet candidate_set_from_json(const std::string& text);
void save_candidate_set(const CandidateSet& set, const std::string& path);
CandidateSet load_candidate_set(const std::string& path);

}  // namespace opslab
