#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "opslab/candidates.hpp"
#include "opslab/func_approx.hpp"
#include "opslab/mdp.hpp"
#include "opslab/report.hpp"

namespace opslab {

// Off-policy value estimators. Behavior probabilities always come from the
// dataset record; they are never re-estimated.

struct OpeEstimate {
    double value = 0.0;
    bool diverged = false;  // value is the -inf sentinel when set
    std::map<std::string, double> diagnostics;
};

// Trajectory importance sampling: (1/n) sum_i prod_h [pi/pb] * G_i.
// Throws when the target puts positive probability on an action recorded with
// pb = 0, naming the offending (h, s, a).
OpeEstimate is_estimate(const Dataset& data, const Policy& target);

// Self-normalized IS. All-zero weights set the diverged flag (no normalizer).
OpeEstimate wis_estimate(const Dataset& data, const Policy& target);

// Per-decision IS: each reward weighted by its prefix ratio.
OpeEstimate pdis_estimate(const Dataset& data, const Policy& target);

// Fitted Q-evaluation: backward per-horizon regression onto targets
// r + q_{h+1}(s', pi), last layer regressed against r directly. The estimate
// is E_{a~pi(.|s0)} q_0(s0, a); values above U (or non-finite intermediates)
// set the diverged flag and the -inf sentinel. Throws when some layer has no
// transitions, listing the missing h.
OpeEstimate fqe_with_features(const Mdp& mdp, const Dataset& data, const Policy& target,
                              const FunctionClass& base_cls, const FeatureMap& features,
                              double U);

// Same, with the class named as in the candidate grid
// (tabular | linear-fine | linear-coarse). U < 0 means auto: V_max + 100.
OpeEstimate fqe(const Mdp& mdp, const Dataset& data, const Policy& target,
                const std::string& class_name = "tabular", double U = -1.0);

// Rank candidates by descending estimate; diverged entries last; ties toward
// the lowest candidate index. `chosen` is the top-k prefix.
using Estimator = std::function<OpeEstimate(const TrainedCandidate&)>;
SelectionReport ops_by_estimate(const CandidateSet& candidates, const Estimator& estimator,
                                const std::string& method_name, int top_k = 1);

// Convenience: build an Estimator from a harness method string, one of
// "is", "wis", "pdis", "fqe(class=...,U=auto|<number>)".
Estimator make_estimator(const std::string& method, const Mdp& mdp, const Dataset& data);

}  // namespace opslab
