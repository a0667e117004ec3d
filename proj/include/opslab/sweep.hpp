#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opslab/candidates.hpp"
#include "opslab/mdp.hpp"
#include "opslab/metrics.hpp"
#include "opslab/report.hpp"

namespace opslab {

// Sweep experiment execution: a (method x n x seed x k) grid over one
// environment and a fixed candidate set, with crash-safe CSV persistence,
// summary JSON, and SVG regret curves.

struct SweepConfig {
    std::string config_id = "default";
    std::string env_name = "gridworld";
    Regime regime = Regime::well_covered;
    std::vector<std::string> methods{"tde", "sbv", "ibes", "fqe", "is", "fqe+ibes"};
    std::vector<int> ns{100, 316, 1000, 3162, 10000};  // OPS-dataset episodes
    int seeds = 10;
    std::vector<int> ks{1};
    std::uint64_t master_seed = 0;
    std::string csv_path;  // required
};

struct SweepRow {
    std::string config_id, env, regime, method;
    int n = 0;
    int seed = 0;
    int k = 0;
    double regret = 0.0;
    int chosen = -1;
    double walltime_ms = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // the complete grid, existing rows included
    int computed = 0;            // cells run in this invocation (rest resumed)
    TrueValues true_values;
};

// Parses a method string; throws std::invalid_argument with the valid list.
// Accepted: tde, sbv, ibes[(target=be|tq)], is, wis, pdis,
// fqe[(class=...,U=...)], fqe+ibes[(k1=N)].
void validate_selection_method(const std::string& method, const Mdp& mdp);

// Dispatches a method string to the matching selector.
SelectionReport run_selection(const std::string& method, const Mdp& mdp,
                              const CandidateSet& candidates, const Dataset& data,
                              std::uint64_t seed);

// Runs the grid. For a given (n, seed) every method sees the same OPS
// dataset; rows are appended to the CSV as they finish and cells already
// present in the file are skipped, so reruns are no-ops and interrupted runs
// resume. Unknown method strings fail before any work.
SweepResult run_sweep(const Mdp& mdp, const CandidateSet& candidates, const SweepConfig& cfg);

std::vector<SweepRow> load_sweep_csv(const std::string& path);

// Per-(method, n, k) mean regret with standard errors, plus the random
// baseline per k; returns the JSON text.
std::string sweep_summary_json(const std::vector<SweepRow>& rows, const TrueValues& values);

// One regret-vs-n SVG chart per (env, k) with one-standard-error bands.
// Returns the written file paths.
std::vector<std::string> write_sweep_report(const std::vector<SweepRow>& rows,
                                            const TrueValues& values,
                                            const std::string& out_dir);

}  // namespace opslab
