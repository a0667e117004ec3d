#include "opslab.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "opslab/candidates.hpp"
#include "opslab/env.hpp"
#include "opslab/mdp.hpp"
#include "opslab/reduction.hpp"
#include "opslab/serialize.hpp"
#include "opslab/sweep.hpp"

struct opslab_mdp {
    opslab::Mdp m;
};
struct opslab_dataset {
    opslab::Dataset d;
};
struct opslab_candidates {
    opslab::CandidateSet c;
};

namespace {

thread_local std::string g_last_error;

struct NumericError : std::exception {
    std::string msg;
    explicit NumericError(std::string m) : msg(std::move(m)) {}
    const char* what() const noexcept override { return msg.c_str(); }
};

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(const void* ptr, const char* name) {
    if (!ptr) throw std::invalid_argument(std::string(name) + " is null");
}

// Config mistakes exit with 2, so JSON handed in as configuration rethrows as
// invalid_argument; data files keep their own error category.
nlohmann::json parse_config(const char* text) {
    if (!text || !*text) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad config JSON: ") + e.what());
    }
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* name : allowed) ok = ok || key == name;
        if (!ok) throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

template <typename Fn>
auto input_scope(Fn&& fn) {
    try {
        return fn();
    } catch (const NumericError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(e.what());
    }
}

template <typename Fn>
int guard(Fn&& fn) {
    try {
        fn();
        return OPSLAB_OK;
    } catch (const NumericError& e) {
        g_last_error = e.msg;
        return OPSLAB_ERR_NUMERIC;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return OPSLAB_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return OPSLAB_ERR_INPUT;
    }
}

opslab::Mdp build_mdp(const std::string& kind, const nlohmann::json& params) {
    if (kind == "gridworld") {
        reject_unknown_keys(params,
                            {"width", "height", "horizon", "slip_prob", "reward_layout", "seed"});
        opslab::GridworldParams p;
        p.width = params.value("width", p.width);
        p.height = params.value("height", p.height);
        p.horizon = params.value("horizon", p.horizon);
        p.slip_prob = params.value("slip_prob", p.slip_prob);
        p.seed = params.value("seed", p.seed);
        if (params.contains("reward_layout"))
            p.reward_layout = params.at("reward_layout").get<std::vector<double>>();
        return opslab::make_gridworld(p);
    }
    if (kind == "tree_hard") {
        reject_unknown_keys(params, {"A", "H", "eps", "which"});
        const int a = params.value("A", 2);
        const int h = params.value("H", 3);
        const double eps = params.value("eps", 0.25);
        const int which = params.value("which", 1);
        if (which != 1 && which != 2)
            throw std::invalid_argument("tree_hard 'which' must be 1 or 2");
        auto pair = opslab::make_tree_hard(a, h, eps);
        return which == 1 ? std::move(pair.first) : std::move(pair.second);
    }
    throw std::invalid_argument("unknown environment kind '" + kind +
                                "'; valid: gridworld, tree_hard");
}

std::string report_to_json(const opslab::SelectionReport& report) {
    nlohmann::json j;
    j["method"] = report.method;
    j["scores"] = report.scores;
    j["ranking"] = report.ranking;
    j["chosen"] = report.chosen;
    j["config"] = report.config;
    j["seed"] = report.seed;
    return j.dump(2);
}

opslab::SweepConfig sweep_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"config_id", "env_name", "regime", "methods", "ns", "seeds", "ks",
                            "master_seed", "csv_path"});
    opslab::SweepConfig cfg;
    cfg.config_id = j.value("config_id", cfg.config_id);
    cfg.env_name = j.value("env_name", cfg.env_name);
    if (j.contains("regime"))
        cfg.regime = opslab::regime_from_string(j.at("regime").get<std::string>());
    if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("ns")) cfg.ns = j.at("ns").get<std::vector<int>>();
    cfg.seeds = j.value("seeds", cfg.seeds);
    if (j.contains("ks")) cfg.ks = j.at("ks").get<std::vector<int>>();
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.csv_path = j.value("csv_path", cfg.csv_path);
    if (cfg.csv_path.empty()) throw std::invalid_argument("sweep config needs 'csv_path'");
    return cfg;
}

}  // namespace

extern "C" {

const char* opslab_last_error(void) { return g_last_error.c_str(); }

void opslab_string_free(char* s) { std::free(s); }

int opslab_mdp_create(const char* kind, const char* params_json, opslab_mdp** out) {
    return guard([&] {
        require(kind, "kind");
        require(out, "out");
        *out = new opslab_mdp{build_mdp(kind, parse_config(params_json))};
    });
}

int opslab_mdp_load(const char* path, opslab_mdp** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new opslab_mdp{input_scope([&] { return opslab::load_mdp(path); })};
    });
}

int opslab_mdp_save(const opslab_mdp* mdp, const char* path) {
    return guard([&] {
        require(mdp, "mdp");
        require(path, "path");
        input_scope([&] { opslab::save_mdp(mdp->m, path); });
    });
}

int opslab_mdp_info(const opslab_mdp* mdp, char** json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(json_out, "json_out");
        nlohmann::json j;
        j["horizon"] = mdp->m.horizon;
        j["num_actions"] = mdp->m.num_actions;
        j["states_per_layer"] = mdp->m.states_per_layer;
        j["r_max"] = mdp->m.r_max;
        j["v_max"] = mdp->m.v_max();
        j["initial_state"] = mdp->m.initial_state;
        const opslab::QFunction qstar = opslab::optimal_q(mdp->m);
        j["optimal_value"] =
            opslab::exact_policy_value(mdp->m, opslab::greedy_policy(qstar));
        j["metadata"] = mdp->m.metadata;
        *json_out = dup_string(j.dump(2));
    });
}

void opslab_mdp_free(opslab_mdp* mdp) { delete mdp; }

int opslab_dataset_sample(const opslab_mdp* mdp, const opslab_candidates* candidates,
                          const char* regime, int episodes, uint64_t seed,
                          opslab_dataset** out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(regime, "regime");
        require(out, "out");
        const opslab::Regime r = opslab::regime_from_string(regime);
        *out = new opslab_dataset{
            opslab::make_ops_dataset(mdp->m, candidates->c, r, episodes, seed)};
    });
}

int opslab_dataset_sample_policy(const opslab_mdp* mdp, const char* policy_name, int episodes,
                                 uint64_t seed, opslab_dataset** out) {
    return guard([&] {
        require(mdp, "mdp");
        require(policy_name, "policy_name");
        require(out, "out");
        const std::string name = policy_name;
        opslab::Policy pi;
        if (name == "uniform") {
            pi = opslab::Policy::uniform(mdp->m);
        } else if (name == "eps_greedy_optimal") {
            pi = opslab::epsilon_greedy(
                opslab::greedy_policy(opslab::optimal_q(mdp->m)), 0.4);
        } else {
            throw std::invalid_argument("unknown policy '" + name +
                                        "'; valid: uniform, eps_greedy_optimal");
        }
        *out = new opslab_dataset{opslab::sample_trajectories(mdp->m, pi, episodes, seed)};
    });
}

int opslab_dataset_load(const char* path, opslab_dataset** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new opslab_dataset{input_scope([&] { return opslab::load_dataset(path); })};
    });
}

int opslab_dataset_save(const opslab_dataset* data, const char* path) {
    return guard([&] {
        require(data, "data");
        require(path, "path");
        input_scope([&] { opslab::save_dataset(data->d, path); });
    });
}

int opslab_dataset_episodes(const opslab_dataset* data, int* out) {
    return guard([&] {
        require(data, "data");
        require(out, "out");
        *out = static_cast<int>(data->d.trajectories.size());
    });
}

void opslab_dataset_free(opslab_dataset* data) { delete data; }

int opslab_candidates_train(const opslab_mdp* mdp, const opslab_dataset* data,
                            const char* grid_json, uint64_t master_seed,
                            opslab_candidates** out) {
    return guard([&] {
        require(mdp, "mdp");
        require(data, "data");
        require(out, "out");
        opslab::GridAxes axes;
        if (grid_json && *grid_json && std::string(grid_json) != "default") {
            const nlohmann::json j = parse_config(grid_json);
            reject_unknown_keys(j, {"learning_rates", "class_names", "alphas", "iterations"});
            if (j.contains("learning_rates"))
                axes.learning_rates = j.at("learning_rates").get<std::vector<double>>();
            if (j.contains("class_names"))
                axes.class_names = j.at("class_names").get<std::vector<std::string>>();
            if (j.contains("alphas")) axes.alphas = j.at("alphas").get<std::vector<double>>();
            if (j.contains("iterations"))
                axes.iterations = j.at("iterations").get<std::vector<int>>();
        }
        *out = new opslab_candidates{
            opslab::build_candidate_grid(mdp->m, data->d, axes, master_seed)};
    });
}

int opslab_candidates_load(const char* path, opslab_candidates** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        *out = new opslab_candidates{
            input_scope([&] { return opslab::load_candidate_set(path); })};
    });
}

int opslab_candidates_save(const opslab_candidates* candidates, const char* path) {
    return guard([&] {
        require(candidates, "candidates");
        require(path, "path");
        input_scope([&] { opslab::save_candidate_set(candidates->c, path); });
    });
}

int opslab_candidates_count(const opslab_candidates* candidates, int* out) {
    return guard([&] {
        require(candidates, "candidates");
        require(out, "out");
        *out = static_cast<int>(candidates->c.entries.size());
    });
}

int opslab_true_values(const opslab_mdp* mdp, const opslab_candidates* candidates,
                       char** json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(json_out, "json_out");
        nlohmann::json j;
        j["values"] = nlohmann::json::array();
        for (const auto& entry : candidates->c.entries)
            j["values"].push_back(opslab::exact_policy_value(mdp->m, entry.policy));
        j["provenance"] = "exact_dp";
        *json_out = dup_string(j.dump(2));
    });
}

void opslab_candidates_free(opslab_candidates* candidates) { delete candidates; }

int opslab_select(const opslab_mdp* mdp, const opslab_candidates* candidates,
                  const opslab_dataset* data, const char* method, uint64_t seed,
                  char** report_json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(data, "data");
        require(method, "method");
        require(report_json_out, "report_json_out");
        opslab::validate_selection_method(method, mdp->m);
        if (candidates->c.entries.empty())
            throw std::runtime_error("candidate set is empty");
        const opslab::SelectionReport report = input_scope(
            [&] { return opslab::run_selection(method, mdp->m, candidates->c, data->d, seed); });
        for (double s : report.scores)
            if (std::isnan(s))
                throw NumericError(std::string("method '") + method +
                                   "' produced a non-finite score");
        *report_json_out = dup_string(report_to_json(report));
    });
}

int opslab_sweep(const opslab_mdp* mdp, const opslab_candidates* candidates,
                 const char* config_json, char** summary_json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(summary_json_out, "summary_json_out");
        const opslab::SweepConfig cfg = sweep_config_from_json(parse_config(config_json));
        const opslab::SweepResult result = opslab::run_sweep(mdp->m, candidates->c, cfg);
        *summary_json_out =
            dup_string(opslab::sweep_summary_json(result.rows, result.true_values));
    });
}

int opslab_sweep_summary(const opslab_mdp* mdp, const opslab_candidates* candidates,
                         const char* csv_path, char** summary_json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(csv_path, "csv_path");
        require(summary_json_out, "summary_json_out");
        const auto rows = input_scope([&] { return opslab::load_sweep_csv(csv_path); });
        if (rows.empty()) throw std::runtime_error(std::string("no rows in ") + csv_path);
        opslab::TrueValues values;
        values.provenance = "exact_dp";
        for (const auto& entry : candidates->c.entries)
            values.values.push_back(opslab::exact_policy_value(mdp->m, entry.policy));
        *summary_json_out = dup_string(opslab::sweep_summary_json(rows, values));
    });
}

int opslab_sweep_report(const opslab_mdp* mdp, const opslab_candidates* candidates,
                        const char* csv_path, const char* out_dir, char** files_json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(csv_path, "csv_path");
        require(out_dir, "out_dir");
        require(files_json_out, "files_json_out");
        const auto rows = input_scope([&] { return opslab::load_sweep_csv(csv_path); });
        if (rows.empty()) throw std::runtime_error(std::string("no rows in ") + csv_path);
        opslab::TrueValues values;
        values.provenance = "exact_dp";
        for (const auto& entry : candidates->c.entries)
            values.values.push_back(opslab::exact_policy_value(mdp->m, entry.policy));
        const auto files = opslab::write_sweep_report(rows, values, out_dir);
        *files_json_out = dup_string(nlohmann::json(files).dump(2));
    });
}

int opslab_reduction_demo(const opslab_mdp* mdp, const opslab_candidates* candidates,
                          int target_index, double eps, const char* oracle, int n_per_call,
                          uint64_t seed, char** result_json_out) {
    return guard([&] {
        require(mdp, "mdp");
        require(candidates, "candidates");
        require(oracle, "oracle");
        require(result_json_out, "result_json_out");
        if (target_index < 0 || target_index >= static_cast<int>(candidates->c.entries.size()))
            throw std::invalid_argument("target_index out of range");
        const std::string kind = oracle;
        opslab::OpsOracle ops = kind == "exact" ? opslab::exact_dp_oracle()
                              : kind == "sampling"
                                  ? opslab::sampling_is_oracle(n_per_call, seed)
                                  : throw std::invalid_argument("unknown oracle '" + kind +
                                                                "'; valid: exact, sampling");
        const opslab::Policy& target = candidates->c.entries[target_index].policy;
        const opslab::ReductionResult result = opslab::ope_via_ops(ops, mdp->m, target, eps);
        const double true_value = opslab::exact_policy_value(mdp->m, target);
        nlohmann::json j;
        j["estimate"] = result.estimate;
        j["true_value"] = true_value;
        j["error"] = std::abs(result.estimate - true_value);
        j["calls"] = result.calls;
        j["eps_prime"] = result.eps_prime;
        j["trace"] = nlohmann::json::array();
        for (const auto& step : result.trace) {
            nlohmann::json s;
            s["call"] = step.call;
            s["r"] = step.r;
            s["chosen"] = step.chosen;
            s["lo"] = step.lo;
            s["hi"] = step.hi;
            j["trace"].push_back(std::move(s));
        }
        *result_json_out = dup_string(j.dump(2));
    });
}

}  // extern "C"
