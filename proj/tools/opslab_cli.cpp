// Command-line front end. Talks to the library exclusively through the C API
// in opslab.h; JSON here is only config plumbing.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opslab.h"

namespace {

using nlohmann::json;

struct Mdp {
    opslab_mdp* h = nullptr;
    ~Mdp() { opslab_mdp_free(h); }
};
struct Data {
    opslab_dataset* h = nullptr;
    ~Data() { opslab_dataset_free(h); }
};
struct Cands {
    opslab_candidates* h = nullptr;
    ~Cands() { opslab_candidates_free(h); }
};

std::string take(char* s) {
    std::string out = s ? s : "";
    opslab_string_free(s);
    return out;
}

int fail(int code) {
    std::cerr << "error: " << opslab_last_error() << "\n";
    return code;
}

std::uint64_t env_default_seed() {
    const char* v = std::getenv("OPSLAB_SEED");
    if (!v || !*v) return 0;
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        std::cerr << "warning: ignoring non-numeric OPSLAB_SEED '" << v << "'\n";
        return 0;
    }
}

int write_text(const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return 3;
    }
    return 0;
}

std::string read_text_or_die(const std::string& path, int& code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << path << "\n";
        code = 3;
        return "";
    }
    std::stringstream buf;
    buf << in.rdbuf();
    code = 0;
    return buf.str();
}

// "@file" loads the grid axes from a file, anything else is inline JSON or
// the literal "default".
std::string resolve_grid_arg(const std::string& grid, int& code) {
    code = 0;
    if (grid.rfind('@', 0) == 0) return read_text_or_die(grid.substr(1), code);
    return grid;
}

int load_env(const std::string& path, Mdp& mdp) {
    if (const int rc = opslab_mdp_load(path.c_str(), &mdp.h)) return fail(rc);
    return 0;
}

int print_env_summary(const std::string& path, opslab_mdp* h) {
    char* info = nullptr;
    if (const int rc = opslab_mdp_info(h, &info)) return fail(rc);
    const json j = json::parse(take(info));
    std::cout << "wrote " << path << " H=" << j.at("horizon")
              << " A=" << j.at("num_actions")
              << " optimal_value=" << j.at("optimal_value").get<double>() << "\n";
    return 0;
}

// ---- gen-env ----

struct GenEnvArgs {
    std::string kind, out;
    int width = 3, height = 3, horizon = 6;
    double slip_prob = 0.0;
    int a = 2, h = 3;
    double eps = 0.25;
    std::uint64_t seed = 0;
};

int cmd_gen_env(const GenEnvArgs& args) {
    if (args.kind == "tree_hard") {
        // the hard pair: one file per instance, _m1/_m2 before the extension
        const std::filesystem::path base(args.out);
        const std::string stem = (base.parent_path() / base.stem()).string();
        const std::string ext = base.extension().empty() ? ".json" : base.extension().string();
        for (int which = 1; which <= 2; ++which) {
            json params{{"A", args.a}, {"H", args.h}, {"eps", args.eps}, {"which", which}};
            Mdp mdp;
            if (const int rc =
                    opslab_mdp_create("tree_hard", params.dump().c_str(), &mdp.h))
                return fail(rc);
            const std::string path = stem + "_m" + std::to_string(which) + ext;
            if (const int rc = opslab_mdp_save(mdp.h, path.c_str())) return fail(rc);
            if (const int rc = print_env_summary(path, mdp.h)) return rc;
        }
        return 0;
    }
    json params{{"width", args.width},
                {"height", args.height},
                {"horizon", args.horizon},
                {"slip_prob", args.slip_prob},
                {"seed", args.seed}};
    Mdp mdp;
    if (const int rc = opslab_mdp_create(args.kind.c_str(), params.dump().c_str(), &mdp.h))
        return fail(rc);
    if (const int rc = opslab_mdp_save(mdp.h, args.out.c_str())) return fail(rc);
    return print_env_summary(args.out, mdp.h);
}

// ---- gen-data ----

struct GenDataArgs {
    std::string env, candidates, regime = "well_covered", policy = "uniform", out;
    int n = 1000;
    std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataArgs& args) {
    Mdp mdp;
    if (const int rc = load_env(args.env, mdp)) return rc;
    Data data;
    if (!args.candidates.empty()) {
        Cands cands;
        if (const int rc = opslab_candidates_load(args.candidates.c_str(), &cands.h))
            return fail(rc);
        if (const int rc = opslab_dataset_sample(mdp.h, cands.h, args.regime.c_str(), args.n,
                                                 args.seed, &data.h))
            return fail(rc);
    } else {
        if (const int rc = opslab_dataset_sample_policy(mdp.h, args.policy.c_str(), args.n,
                                                        args.seed, &data.h))
            return fail(rc);
    }
    if (const int rc = opslab_dataset_save(data.h, args.out.c_str())) return fail(rc);
    int episodes = 0;
    opslab_dataset_episodes(data.h, &episodes);
    std::cout << "wrote " << args.out << " trajectories=" << episodes << "\n";
    return 0;
}

// ---- train-candidates ----

struct TrainArgs {
    std::string env, data, grid = "default", out;
    std::uint64_t seed = 0;
};

int cmd_train_candidates(const TrainArgs& args) {
    Mdp mdp;
    if (const int rc = load_env(args.env, mdp)) return rc;
    Data data;
    if (const int rc = opslab_dataset_load(args.data.c_str(), &data.h)) return fail(rc);
    int code = 0;
    const std::string grid = resolve_grid_arg(args.grid, code);
    if (code) return code;
    Cands cands;
    if (const int rc =
            opslab_candidates_train(mdp.h, data.h, grid.c_str(), args.seed, &cands.h))
        return fail(rc);
    if (const int rc = opslab_candidates_save(cands.h, args.out.c_str())) return fail(rc);
    int count = 0;
    opslab_candidates_count(cands.h, &count);
    std::cout << "wrote " << args.out << " candidates=" << count << "\n";
    return 0;
}

// ---- select ----

struct SelectArgs {
    std::string env, candidates, data, method, out;
    std::uint64_t seed = 0;
};

int cmd_select(const SelectArgs& args) {
    Mdp mdp;
    if (const int rc = load_env(args.env, mdp)) return rc;
    Cands cands;
    if (const int rc = opslab_candidates_load(args.candidates.c_str(), &cands.h))
        return fail(rc);
    Data data;
    if (const int rc = opslab_dataset_load(args.data.c_str(), &data.h)) return fail(rc);
    char* report = nullptr;
    if (const int rc = opslab_select(mdp.h, cands.h, data.h, args.method.c_str(), args.seed,
                                     &report))
        return fail(rc);
    const std::string text = take(report);
    if (args.out.empty()) {
        std::cout << text << "\n";
        return 0;
    }
    if (const int rc = write_text(args.out, text + "\n")) return rc;
    std::cout << "wrote " << args.out
              << " chosen=" << json::parse(text).at("ranking")[0].get<int>() << "\n";
    return 0;
}

// ---- sweep ----

struct SweepArgs {
    std::string config;  // RunConfig path; flags below are the direct mode
    std::string env, candidates, regime = "well_covered", csv, summary, config_id = "default";
    std::vector<std::string> methods{"tde", "sbv", "ibes", "fqe", "is", "fqe+ibes"};
    std::vector<int> ns{100, 316, 1000, 3162, 10000};
    std::vector<int> ks{1};
    int seeds = 10;
    int jobs = 1;
    std::uint64_t seed = 0;
};

int run_sweep_outputs(opslab_mdp* mdp, opslab_candidates* cands, const json& sweep_cfg,
                      const std::string& summary_path, const std::string& report_dir) {
    char* summary = nullptr;
    if (const int rc = opslab_sweep(mdp, cands, sweep_cfg.dump().c_str(), &summary))
        return fail(rc);
    const std::string text = take(summary);
    std::cout << "wrote " << sweep_cfg.at("csv_path").get<std::string>() << "\n";
    if (!summary_path.empty()) {
        if (const int rc = write_text(summary_path, text + "\n")) return rc;
        std::cout << "wrote " << summary_path << "\n";
    } else {
        std::cout << text << "\n";
    }
    if (!report_dir.empty()) {
        char* files = nullptr;
        if (const int rc = opslab_sweep_report(
                mdp, cands, sweep_cfg.at("csv_path").get<std::string>().c_str(),
                report_dir.c_str(), &files))
            return fail(rc);
        for (const auto& f : json::parse(take(files)))
            std::cout << "wrote " << f.get<std::string>() << "\n";
    }
    return 0;
}

int cmd_sweep_config(const std::string& path, std::uint64_t master_seed) {
    int code = 0;
    const std::string text = read_text_or_die(path, code);
    if (code) return code;
    json cfg;
    try {
        cfg = json::parse(text);
        for (const auto& [key, value] : cfg.items())
            if (key != "env" && key != "data" && key != "candidates" && key != "methods" &&
                key != "sweep" && key != "output")
                throw std::runtime_error("unknown config section '" + key + "'");
    } catch (const std::exception& e) {
        std::cerr << "error: " << path << ": " << e.what() << "\n";
        return 2;
    }

    json env = cfg.value("env", json{{"kind", "gridworld"}});
    const std::string kind = env.value("kind", "gridworld");
    env.erase("kind");
    Mdp mdp;
    if (const int rc = opslab_mdp_create(kind.c_str(), env.dump().c_str(), &mdp.h))
        return fail(rc);

    const json data_cfg = cfg.value("data", json::object());
    const json cand_cfg = cfg.value("candidates", json::object());
    Cands cands;
    if (cand_cfg.contains("path")) {
        if (const int rc = opslab_candidates_load(
                cand_cfg.at("path").get<std::string>().c_str(), &cands.h))
            return fail(rc);
    } else {
        const std::string policy = cand_cfg.value("train_policy", "uniform");
        const int episodes = cand_cfg.value("train_episodes", 300);
        const std::uint64_t train_seed = cand_cfg.value("train_seed", master_seed + 1);
        Data train;
        if (const int rc = opslab_dataset_sample_policy(mdp.h, policy.c_str(), episodes,
                                                        train_seed, &train.h))
            return fail(rc);
        const json grid = cand_cfg.value("grid", json("default"));
        const std::string grid_text = grid.is_string() ? grid.get<std::string>() : grid.dump();
        if (const int rc = opslab_candidates_train(mdp.h, train.h, grid_text.c_str(),
                                                   master_seed, &cands.h))
            return fail(rc);
    }

    const json sweep = cfg.value("sweep", json::object());
    const json output = cfg.value("output", json::object());
    const std::string out_dir = output.value("dir", "out");
    json sweep_cfg;
    sweep_cfg["config_id"] = output.value("config_id", "default");
    sweep_cfg["env_name"] = kind;
    sweep_cfg["regime"] = data_cfg.value("regime", "well_covered");
    if (cfg.contains("methods")) sweep_cfg["methods"] = cfg.at("methods");
    if (sweep.contains("ns")) sweep_cfg["ns"] = sweep.at("ns");
    if (sweep.contains("seeds")) sweep_cfg["seeds"] = sweep.at("seeds");
    if (sweep.contains("ks")) sweep_cfg["ks"] = sweep.at("ks");
    sweep_cfg["master_seed"] = data_cfg.value("seed", master_seed);
    sweep_cfg["csv_path"] = out_dir + "/sweep.csv";
    std::filesystem::create_directories(out_dir);
    return run_sweep_outputs(mdp.h, cands.h, sweep_cfg, out_dir + "/summary.json", out_dir);
}

int cmd_sweep(const SweepArgs& args) {
    if (args.jobs > 1)
        std::cerr << "note: --jobs " << args.jobs << " requested; running sequentially\n";
    if (!args.config.empty()) return cmd_sweep_config(args.config, args.seed);
    if (args.env.empty() || args.candidates.empty() || args.csv.empty()) {
        std::cerr << "error: sweep needs --env, --candidates and --csv (or --config)\n";
        return 2;
    }
    Mdp mdp;
    if (const int rc = load_env(args.env, mdp)) return rc;
    Cands cands;
    if (const int rc = opslab_candidates_load(args.candidates.c_str(), &cands.h))
        return fail(rc);
    json sweep_cfg;
    sweep_cfg["config_id"] = args.config_id;
    sweep_cfg["env_name"] = std::filesystem::path(args.env).stem().string();
    sweep_cfg["regime"] = args.regime;
    sweep_cfg["methods"] = args.methods;
    sweep_cfg["ns"] = args.ns;
    sweep_cfg["seeds"] = args.seeds;
    sweep_cfg["ks"] = args.ks;
    sweep_cfg["master_seed"] = args.seed;
    sweep_cfg["csv_path"] = args.csv;
    return run_sweep_outputs(mdp.h, cands.h, sweep_cfg, args.summary, "");
}

// ---- report ----

struct ReportArgs {
    std::string env, candidates, csv, out_dir;
};

int cmd_report(const ReportArgs& args) {
    Mdp mdp;
    if (const int rc = load_env(args.env, mdp)) return rc;
    Cands cands;
    if (const int rc = opslab_candidates_load(args.candidates.c_str(), &cands.h))
        return fail(rc);
    char* summary = nullptr;
    if (const int rc = opslab_sweep_summary(mdp.h, cands.h, args.csv.c_str(), &summary))
        return fail(rc);
    const std::string summary_path = args.out_dir + "/summary.json";
    std::filesystem::create_directories(args.out_dir);
    if (const int rc = write_text(summary_path, take(summary) + "\n")) return rc;
    std::cout << "wrote " << summary_path << "\n";
    char* files = nullptr;
    if (const int rc = opslab_sweep_report(mdp.h, cands.h, args.csv.c_str(),
                                           args.out_dir.c_str(), &files))
        return fail(rc);
    for (const auto& f : json::parse(take(files)))
        std::cout << "wrote " << f.get<std::string>() << "\n";
    return 0;
}

// ---- reduction-demo ----

struct ReductionArgs {
    std::string env, candidates, oracle = "exact", trace;
    int target = 0;
    double eps = 0.1;
    int n_per_call = 1000;
    std::uint64_t seed = 0;
};

int cmd_reduction_demo(const ReductionArgs& args) {
    Mdp mdp;
    if (const int rc = load_env(args.env, mdp)) return rc;
    Cands cands;
    if (const int rc = opslab_candidates_load(args.candidates.c_str(), &cands.h))
        return fail(rc);
    char* out = nullptr;
    if (const int rc = opslab_reduction_demo(mdp.h, cands.h, args.target, args.eps,
                                             args.oracle.c_str(), args.n_per_call, args.seed,
                                             &out))
        return fail(rc);
    const json j = json::parse(take(out));
    std::ostringstream csv;
    csv << "call,r,chosen,L,U\n";
    for (const auto& step : j.at("trace"))
        csv << step.at("call").get<int>() << ',' << step.at("r").get<double>() << ','
            << step.at("chosen").get<int>() << ',' << step.at("lo").get<double>() << ','
            << step.at("hi").get<double>() << "\n";
    if (!args.trace.empty()) {
        if (const int rc = write_text(args.trace, csv.str())) return rc;
        std::cout << "wrote " << args.trace << "\n";
    } else {
        std::cout << csv.str();
    }
    std::cout << "estimate=" << j.at("estimate").get<double>()
              << " true=" << j.at("true_value").get<double>()
              << " error=" << j.at("error").get<double>()
              << " calls=" << j.at("calls").get<int>() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline policy selection benchmark"};
    app.require_subcommand(1);
    const std::uint64_t default_seed = env_default_seed();

    GenEnvArgs ge;
    ge.seed = default_seed;
    auto* gen_env = app.add_subcommand("gen-env", "write environment MDP files");
    gen_env->add_option("--kind", ge.kind, "gridworld | tree_hard")->required();
    gen_env->add_option("--out", ge.out, "output path (tree_hard appends _m1/_m2)")->required();
    gen_env->add_option("--width", ge.width);
    gen_env->add_option("--height", ge.height);
    gen_env->add_option("--horizon", ge.horizon);
    gen_env->add_option("--slip-prob", ge.slip_prob);
    gen_env->add_option("--A", ge.a, "tree_hard action count");
    gen_env->add_option("--H", ge.h, "tree_hard horizon");
    gen_env->add_option("--eps", ge.eps, "tree_hard value gap parameter");
    gen_env->add_option("--seed", ge.seed);

    GenDataArgs gd;
    gd.seed = default_seed;
    auto* gen_data = app.add_subcommand("gen-data", "sample a trajectory dataset");
    gen_data->add_option("--env", gd.env, "MDP JSON file")->required();
    gen_data->add_option("--out", gd.out, "output JSONL path")->required();
    gen_data->add_option("--candidates", gd.candidates,
                         "candidate file; enables the mixture regimes");
    gen_data->add_option("--regime", gd.regime,
                         "well_covered | well_covered_plus_optimal (with --candidates)");
    gen_data->add_option("--policy", gd.policy,
                         "uniform | eps_greedy_optimal (without --candidates)");
    gen_data->add_option("--n", gd.n, "episodes");
    gen_data->add_option("--seed", gd.seed);

    TrainArgs tr;
    tr.seed = default_seed;
    auto* train = app.add_subcommand("train-candidates", "train the candidate grid");
    train->add_option("--env", tr.env)->required();
    train->add_option("--data", tr.data, "training dataset JSONL")->required();
    train->add_option("--out", tr.out)->required();
    train->add_option("--grid", tr.grid, "default | inline JSON | @file");
    train->add_option("--seed", tr.seed);

    SelectArgs se;
    se.seed = default_seed;
    auto* select = app.add_subcommand("select", "run one selection method");
    select->add_option("--env", se.env)->required();
    select->add_option("--candidates", se.candidates)->required();
    select->add_option("--data", se.data, "OPS dataset JSONL")->required();
    select->add_option("--method", se.method)->required();
    select->add_option("--out", se.out, "report JSON path (default: stdout)");
    select->add_option("--seed", se.seed);

    SweepArgs sw;
    sw.seed = default_seed;
    auto* sweep = app.add_subcommand("sweep", "run the (method x n x seed x k) grid");
    sweep->add_option("--config", sw.config, "run-config JSON (overrides the flags)");
    sweep->add_option("--env", sw.env);
    sweep->add_option("--candidates", sw.candidates);
    sweep->add_option("--regime", sw.regime);
    sweep->add_option("--methods", sw.methods)->delimiter(',');
    sweep->add_option("--ns", sw.ns)->delimiter(',');
    sweep->add_option("--seeds", sw.seeds);
    sweep->add_option("--ks", sw.ks)->delimiter(',');
    sweep->add_option("--csv", sw.csv, "results CSV (appended, resumable)");
    sweep->add_option("--summary", sw.summary, "summary JSON path (default: stdout)");
    sweep->add_option("--config-id", sw.config_id);
    sweep->add_option("--jobs", sw.jobs);
    sweep->add_option("--seed", sw.seed);

    ReportArgs re;
    auto* report = app.add_subcommand("report", "summary JSON + SVG charts from a sweep CSV");
    report->add_option("--env", re.env)->required();
    report->add_option("--candidates", re.candidates)->required();
    report->add_option("--csv", re.csv)->required();
    report->add_option("--out-dir", re.out_dir)->required();

    ReductionArgs rd;
    rd.seed = default_seed;
    auto* reduction = app.add_subcommand("reduction-demo", "value estimation via bisection");
    reduction->add_option("--env", rd.env)->required();
    reduction->add_option("--candidates", rd.candidates)->required();
    reduction->add_option("--target", rd.target, "candidate index to evaluate");
    reduction->add_option("--eps", rd.eps, "target accuracy");
    reduction->add_option("--oracle", rd.oracle, "exact | sampling");
    reduction->add_option("--n-per-call", rd.n_per_call, "episodes per sampling-oracle call");
    reduction->add_option("--trace", rd.trace, "trace CSV path (default: stdout)");
    reduction->add_option("--seed", rd.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // config errors exit 2
    }

    if (gen_env->parsed()) return cmd_gen_env(ge);
    if (gen_data->parsed()) return cmd_gen_data(gd);
    if (train->parsed()) return cmd_train_candidates(tr);
    if (select->parsed()) return cmd_select(se);
    if (sweep->parsed()) return cmd_sweep(sw);
    if (report->parsed()) return cmd_report(re);
    if (reduction->parsed()) return cmd_reduction_demo(rd);
    return 2;
}
