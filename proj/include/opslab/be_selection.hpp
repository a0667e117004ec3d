#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "opslab/candidates.hpp"
#include "opslab/mdp.hpp"
#include "opslab/report.hpp"

namespace opslab {

// Bellman-error scoring and candidate selection: TDE, the minimax estimator
// with an auxiliary regression class, IBES with holdout class selection, SBV,
// and the two-stage FQE + IBES combiner.

struct BeScore {
    int candidate_index = 0;
    double score = 0.0;
    int selected_class_index = 0;
    double train_loss = 0.0;  // auxiliary regression loss on the fitting data
    double val_loss = 0.0;    // auxiliary regression loss on the class-choice data
};

// Mean squared TD error (1/|D|) sum (q(s,a) - r - v_q(s'))^2 with
// v_q(s) = max_a q(s,a) and v_q == 0 past the last layer. Unbiased for the
// Bellman error only in deterministic environments; transition noise biases
// it upward.
double tde_score(const Dataset& data, const QFunction& q);

enum class BeTargetMode { be, tq };
BeTargetMode be_target_mode_from_string(const std::string& name);

// Minimax Bellman-error estimate with an auxiliary class chosen by holdout:
// every class is fitted on data_fit, the class with the lowest regression
// loss on data_score wins (ties toward the lowest index), and the score is
// computed on data_score.
// Mode be: fit h ~ delta where delta = r + v_q(s') - q(s,a), score
// mean(2*h*delta - h^2). Mode tq: fit g ~ r + v_q(s'), score
// TDE - mean((g - target)^2). With a tabular auxiliary class the two modes
// coincide (change of variable h = g - q).
BeScore minimax_be_score(const Mdp& mdp, const Dataset& data_fit, const Dataset& data_score,
                         const QFunction& q, const std::vector<std::string>& classes,
                         BeTargetMode mode);

// Fit g to targets r + v_q(s') with the same holdout class selection, score
// the squared distance (1/|D_score|) sum (q(s,a) - g(s,a))^2.
BeScore sbv_score(const Mdp& mdp, const Dataset& data_fit, const Dataset& data_score,
                  const QFunction& q, const std::vector<std::string>& classes);

struct IbesConfig {
    std::vector<std::string> classes{"tabular", "linear-coarse"};
    double split_ratio = 0.8;  // train fraction; the rest picks the class
    BeTargetMode target_mode = BeTargetMode::be;
    // The reference procedure fits and scores on the training split and uses
    // validation only to pick the class; this flag scores on validation
    // instead.
    bool score_on_validation = false;
};

// Seeded episode split into train/validation parts (both nonempty).
std::pair<Dataset, Dataset> split_episodes(const Dataset& data, double train_ratio,
                                           std::uint64_t seed);

// Per-candidate minimax BE with holdout class selection; chosen candidate is
// the score argmin, ties toward the lowest index.
SelectionReport ibes_select(const Mdp& mdp, const CandidateSet& candidates, const Dataset& data,
                            const IbesConfig& cfg, std::uint64_t seed, int top_k = 1);

// SBV applied per candidate with the same split conventions.
SelectionReport sbv_select(const Mdp& mdp, const CandidateSet& candidates, const Dataset& data,
                           const IbesConfig& cfg, std::uint64_t seed, int top_k = 1);

// Rank candidates by ascending TDE.
SelectionReport tde_select(const CandidateSet& candidates, const Dataset& data, int top_k = 1);

struct TwoStageConfig {
    int k1 = 10;
    int k2 = 1;
    std::string fqe_class = "tabular";
    double fqe_U = -1.0;  // auto: V_max + 100
    IbesConfig ibes;
};

// FQE keeps the top k1 candidates, IBES re-ranks them; the final ranking is
// the IBES order of the survivors followed by the FQE order of the rest.
SelectionReport two_stage_select(const Mdp& mdp, const CandidateSet& candidates,
                                 const Dataset& data, const TwoStageConfig& cfg,
                                 std::uint64_t seed);

}  // namespace opslab
