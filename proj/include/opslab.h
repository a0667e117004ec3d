#ifndef OPSLAB_H
#define OPSLAB_H

/* C interface to the offline policy selection library. All functions return a
 * status code; on failure opslab_last_error() describes the problem for the
 * calling thread. Strings returned through char** are heap-allocated and must
 * be released with opslab_string_free. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    OPSLAB_OK = 0,
    OPSLAB_ERR_CONFIG = 2,  /* bad option, method string, or config JSON */
    OPSLAB_ERR_INPUT = 3,   /* unreadable or malformed input data/files */
    OPSLAB_ERR_NUMERIC = 4  /* non-finite values escaping a method */
};

typedef struct opslab_mdp opslab_mdp;
typedef struct opslab_dataset opslab_dataset;
typedef struct opslab_candidates opslab_candidates;

const char* opslab_last_error(void);
void opslab_string_free(char* s);

/* ---- Environments ----
 * kind "gridworld": params {"width","height","horizon","slip_prob","seed"}.
 * kind "tree_hard": params {"A","H","eps","which"} with which in {1,2} picking
 * the instance of the pair. Omitted keys take defaults. params_json may be
 * NULL or "" for all defaults. */
int opslab_mdp_create(const char* kind, const char* params_json, opslab_mdp** out);
int opslab_mdp_load(const char* path, opslab_mdp** out);
int opslab_mdp_save(const opslab_mdp* mdp, const char* path);
/* Shape and metadata summary: horizon, num_actions, states_per_layer, v_max,
 * optimal_value, metadata. */
int opslab_mdp_info(const opslab_mdp* mdp, char** json_out);
void opslab_mdp_free(opslab_mdp* mdp);

/* ---- Datasets (JSON Lines trajectories) ---- */
/* regime: "well_covered" | "well_covered_plus_optimal"; episodes drawn from
 * the per-episode mixture of the candidate policies. */
int opslab_dataset_sample(const opslab_mdp* mdp, const opslab_candidates* candidates,
                          const char* regime, int episodes, uint64_t seed,
                          opslab_dataset** out);
/* Episodes from a single policy: "uniform" or "eps_greedy_optimal" (the
 * 0.4-eps-greedy of the optimal greedy policy). */
int opslab_dataset_sample_policy(const opslab_mdp* mdp, const char* policy_name, int episodes,
                                 uint64_t seed, opslab_dataset** out);
int opslab_dataset_load(const char* path, opslab_dataset** out);
int opslab_dataset_save(const opslab_dataset* data, const char* path);
int opslab_dataset_episodes(const opslab_dataset* data, int* out);
void opslab_dataset_free(opslab_dataset* data);

/* ---- Candidate training ----
 * grid_json overrides hyperparameter axes: {"learning_rates":[...],
 * "class_names":[...], "alphas":[...], "iterations":[...]}. NULL, "" or
 * "default" selects the built-in 90-entry grid. */
int opslab_candidates_train(const opslab_mdp* mdp, const opslab_dataset* data,
                            const char* grid_json, uint64_t master_seed,
                            opslab_candidates** out);
int opslab_candidates_load(const char* path, opslab_candidates** out);
int opslab_candidates_save(const opslab_candidates* candidates, const char* path);
int opslab_candidates_count(const opslab_candidates* candidates, int* out);
/* Exact per-candidate values: {"values":[...],"provenance":"exact_dp"}. */
int opslab_true_values(const opslab_mdp* mdp, const opslab_candidates* candidates,
                       char** json_out);
void opslab_candidates_free(opslab_candidates* candidates);

/* ---- Selection ----
 * method: tde | sbv | ibes[(target=be|tq)] | is | wis | pdis |
 * fqe[(class=...,U=...)] | fqe+ibes[(k1=N)].
 * Emits {"method","scores","ranking","chosen","config","seed"}; ranking is
 * best-first over all candidates. */
int opslab_select(const opslab_mdp* mdp, const opslab_candidates* candidates,
                  const opslab_dataset* data, const char* method, uint64_t seed,
                  char** report_json_out);

/* ---- Sweep ----
 * config_json: {"config_id","env_name","regime","methods":[...],"ns":[...],
 * "seeds","ks":[...],"master_seed","csv_path"}; csv_path is required. Rows are
 * appended to the CSV as they finish; completed cells are skipped on rerun.
 * Returns the summary JSON (per-cell mean regret, standard errors, random
 * baseline). */
int opslab_sweep(const opslab_mdp* mdp, const opslab_candidates* candidates,
                 const char* config_json, char** summary_json_out);
/* Summary JSON (per-cell mean regret, standard errors, random baseline) for an
 * existing sweep CSV. */
int opslab_sweep_summary(const opslab_mdp* mdp, const opslab_candidates* candidates,
                         const char* csv_path, char** summary_json_out);
/* Renders regret-vs-n SVG charts from a sweep CSV into out_dir; returns the
 * written paths as a JSON array. */
int opslab_sweep_report(const opslab_mdp* mdp, const opslab_candidates* candidates,
                        const char* csv_path, const char* out_dir, char** files_json_out);

/* ---- OPE-from-OPS reduction ----
 * Estimates the value of candidate target_index by bisection over reward-probe
 * instances. oracle: "exact" (DP answers) or "sampling" (importance sampling
 * on n_per_call fresh episodes per probe). Returns {"estimate","true_value",
 * "error","calls","eps_prime","trace":[{"call","r","chosen","lo","hi"},...]}. */
int opslab_reduction_demo(const opslab_mdp* mdp, const opslab_candidates* candidates,
                          int target_index, double eps, const char* oracle, int n_per_call,
                          uint64_t seed, char** result_json_out);

#ifdef __cplusplus
}
#endif

#endif /* OPSLAB_H */
