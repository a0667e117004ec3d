#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace opslab {

// Evaluation metrics: normalized top-k regret, Kendall rank correlation, the
// random-selection baseline, and empirical soundness rates.

struct TrueValues {
    std::vector<double> values;  // J(pi) per candidate
    std::string provenance;      // "exact_dp" or "monte_carlo(n=...,stderr=...)"
};

// (J_best - max over the top-k of the ranking) / (J_best - J_worst), in
// [0, 1]. A degenerate spread (all values equal) scores 0. Throws when
// `ranking` is not a permutation of the candidate indices.
double topk_regret(const TrueValues& values, const std::vector<int>& ranking, int k);

// Kendall tau-b (tie-adjusted), computed by merge-sort inversion counting in
// O(n log n). Returns 0 when either sequence is fully tied.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

// Mean top-k regret of uniformly random k-subsets.
double random_baseline_regret(const TrueValues& values, int k, int repeats = 10000,
                              std::uint64_t seed = 0);

struct SoundnessResult {
    double success_rate = 0.0;
    double stderr_ = 0.0;  // binomial standard error
    int seeds = 0;
};

// Fraction of seeds for which the selected candidate's true value is within
// eps of the best candidate. `select_for_seed` runs the method end to end for
// one data seed and returns the chosen index.
SoundnessResult empirical_soundness(const std::function<int(std::uint64_t)>& select_for_seed,
                                    const TrueValues& values, double eps, int seeds);

}  // namespace opslab
