#include "opslab/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "opslab/rng.hpp"

namespace opslab {

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Softmax of a q row, numerically stable.
std::vector<double> softmax(const std::vector<double>& row) {
    const double m = *std::max_element(row.begin(), row.end());
    std::vector<double> out(row.size());
    double z = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
        out[a] = std::exp(row[a] - m);
        z += out[a];
    }
    for (double& p : out) p /= z;
    return out;
}

struct ClassSetup {
    FunctionClass cls;
    FeatureMap features;            // unused for tabular
    CellIndexer idx;
    std::vector<Eigen::VectorXd> cell_features;  // precomputed per flat cell
};

ClassSetup make_class(const Mdp& mdp, const std::string& name, std::uint64_t seed) {
    ClassSetup setup;
    setup.idx = CellIndexer::for_mdp(mdp);
    if (name == "tabular") {
        setup.cls.kind = FcKind::tabular;
        setup.cls.num_cells = setup.idx.total;
    } else if (name == "linear-fine" || name == "linear-coarse") {
        setup.cls.kind = FcKind::linear;
        setup.features = name == "linear-fine" ? onehot_features(mdp) : coarse_features(mdp, 2);
        setup.cls.feature_dim = setup.features.dim;
    } else {
        throw std::invalid_argument("train_conservative_fqi: unknown class '" + name + "'");
    }
    setup.cls.train.seed = seed;
    if (setup.cls.kind != FcKind::tabular) {
        setup.cell_features.resize(setup.idx.total);
        for (int h = 0; h < mdp.horizon; ++h)
            for (int s = 0; s < mdp.states_per_layer[h]; ++s)
                for (int a = 0; a < mdp.num_actions; ++a)
                    setup.cell_features[setup.idx.index(h, s, a)] = setup.features.phi(h, s, a);
    }
    return setup;
}

}  // namespace

TrainedCandidate train_conservative_fqi(const Mdp& mdp, const Dataset& data,
                                        const TrainConfig& cfg) {
    if (data.trajectories.empty())
        throw std::invalid_argument("train_conservative_fqi: empty dataset");
    if (data.horizon != mdp.horizon || data.num_actions != mdp.num_actions)
        throw std::invalid_argument("train_conservative_fqi: dataset shape mismatch");
    if (cfg.iterations < 1)
        throw std::invalid_argument("train_conservative_fqi: iterations must be >= 1");
    if (cfg.conservative_alpha < 0.0)
        throw std::invalid_argument("train_conservative_fqi: alpha must be >= 0");

    ClassSetup setup = make_class(mdp, cfg.class_name, cfg.seed);
    const int H = mdp.horizon;
    const int A = mdp.num_actions;
    const bool tabular = setup.cls.kind == FcKind::tabular;

    std::vector<bool> layer_seen(H, false);
    std::vector<RegInput> inputs;
    std::vector<const Step*> steps;
    for (const auto& traj : data.trajectories) {
        for (const auto& st : traj.steps) {
            layer_seen[st.h] = true;
            RegInput in;
            in.cell = setup.idx.index(st.h, st.s, st.a);
            if (!tabular) in.x = setup.cell_features[in.cell];
            inputs.push_back(std::move(in));
            steps.push_back(&st);
        }
    }

    TrainedCandidate out;
    out.train_seed = cfg.seed;
    out.hyperparams = {{"learning_rate", format_double(cfg.learning_rate)},
                       {"class", cfg.class_name},
                       {"alpha", format_double(cfg.conservative_alpha)},
                       {"iterations", std::to_string(cfg.iterations)}};
    for (int h = 0; h < H; ++h)
        if (!layer_seen[h]) out.hyperparams["warning"] = "layer " + std::to_string(h) + " has no data";

    const int total = setup.idx.total;
    const double n = static_cast<double>(inputs.size());
    const double limit = 10.0 * mdp.v_max();

    // The design matrix is fixed across iterations, so the normal-equations
    // factorization (linear) and per-cell counts (tabular) are cached.
    std::vector<double> cell_count(total, 0.0);
    for (const auto& in : inputs) cell_count[in.cell] += 1.0;
    Eigen::MatrixXd phi;           // total x d, linear only
    Eigen::LDLT<Eigen::MatrixXd> solver;
    if (!tabular) {
        const int d = setup.cls.feature_dim;
        phi.resize(total, d);
        for (int c = 0; c < total; ++c) phi.row(c) = setup.cell_features[c].transpose();
        Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(d, d);
        for (const auto& in : inputs) xtx.noalias() += in.x * in.x.transpose();
        xtx.diagonal().array() += setup.cls.ridge_scale * std::max(1.0, xtx.trace() / d);
        solver.compute(xtx);
    }

    QFunction q = QFunction::zeros(mdp);
    std::vector<double> fit_table(total, 0.0);       // tabular
    Eigen::VectorXd fit_w, pen_w;                    // linear
    std::vector<double> pen_table(total, 0.0);       // tabular penalty offset
    if (!tabular) {
        fit_w = Eigen::VectorXd::Zero(setup.cls.feature_dim);
        pen_w = fit_w;
    }

    auto rebuild = [&] {
        Eigen::VectorXd q_vec;
        if (!tabular) q_vec = phi * (fit_w + pen_w);
        for (int h = 0; h < H; ++h)
            for (int s = 0; s < mdp.states_per_layer[h]; ++s)
                for (int a = 0; a < A; ++a) {
                    const int cell = setup.idx.index(h, s, a);
                    q.table[h][s][a] = tabular ? fit_table[cell] + pen_table[cell] : q_vec[cell];
                }
    };

    for (int iter = 0; iter < cfg.iterations && !out.diverged; ++iter) {
        std::vector<double> targets;
        targets.reserve(steps.size());
        for (const Step* st : steps) {
            double v_next = 0.0;
            if (st->h + 1 < H) v_next = q.state_value(st->h + 1, st->sp);
            targets.push_back(st->r + v_next);
        }
        if (tabular) {
            std::fill(fit_table.begin(), fit_table.end(), 0.0);
            for (std::size_t i = 0; i < inputs.size(); ++i) fit_table[inputs[i].cell] += targets[i];
            for (int c = 0; c < total; ++c)
                if (cell_count[c] > 0.0) fit_table[c] /= cell_count[c];
        } else {
            Eigen::VectorXd xty = Eigen::VectorXd::Zero(setup.cls.feature_dim);
            for (std::size_t i = 0; i < inputs.size(); ++i) xty.noalias() += targets[i] * inputs[i].x;
            fit_w = solver.solve(xty);
        }
        rebuild();

        if (cfg.conservative_alpha > 0.0) {
            const double step = cfg.learning_rate * cfg.conservative_alpha;
            std::vector<double> grad_table;
            Eigen::VectorXd grad_w;
            if (tabular)
                grad_table.assign(total, 0.0);
            else
                grad_w = Eigen::VectorXd::Zero(setup.cls.feature_dim);
            for (const Step* st : steps) {
                const std::vector<double> sm = softmax(q.table[st->h][st->s]);
                for (int a = 0; a < A; ++a) {
                    const double g = sm[a] - (a == st->a ? 1.0 : 0.0);
                    const int cell = setup.idx.index(st->h, st->s, a);
                    if (tabular)
                        grad_table[cell] += g;
                    else
                        grad_w.noalias() += g * setup.cell_features[cell];
                }
            }
            if (tabular)
                for (int c = 0; c < total; ++c) pen_table[c] -= step * grad_table[c] / n;
            else
                pen_w -= (step / n) * grad_w;
            rebuild();
        }

        for (int h = 0; h < H && !out.diverged; ++h)
            for (int s = 0; s < mdp.states_per_layer[h] && !out.diverged; ++s)
                for (int a = 0; a < A; ++a)
                    if (!std::isfinite(q.table[h][s][a]) || std::abs(q.table[h][s][a]) > limit) {
                        out.diverged = true;
                        out.hyperparams["diverged_at_iteration"] = std::to_string(iter);
                        break;
                    }
    }

    out.q = std::move(q);
    out.policy = greedy_policy(out.q);
    return out;
}

CandidateSet build_candidate_grid(const Mdp& mdp, const Dataset& data, const GridAxes& grid,
                                  std::uint64_t master_seed) {
    if (grid.learning_rates.empty() || grid.class_names.empty() || grid.alphas.empty() ||
        grid.iterations.empty())
        throw std::invalid_argument("build_candidate_grid: empty grid axis");
    CandidateSet set;
    std::uint64_t index = 0;
    for (double lr : grid.learning_rates)
        for (const std::string& cls : grid.class_names)
            for (double alpha : grid.alphas)
                for (int iters : grid.iterations) {
                    TrainConfig cfg;
                    cfg.learning_rate = lr;
                    cfg.class_name = cls;
                    cfg.conservative_alpha = alpha;
                    cfg.iterations = iters;
                    cfg.seed = derive_seed(master_seed, index);
                    set.entries.push_back(train_conservative_fqi(mdp, data, cfg));
                    ++index;
                }
    std::ostringstream prov;
    prov << "grid:" << set.entries.size() << " seed:" << master_seed
         << " episodes:" << data.trajectories.size();
    set.provenance = prov.str();
    return set;
}

Policy epsilon_greedy(const Policy& base, double eps) {
    if (eps < 0.0 || eps > 1.0)
        throw std::invalid_argument("epsilon_greedy: eps must be in [0, 1]");
    Policy out = base;
    for (auto& layer : out.probs)
        for (auto& row : layer) {
            const double u = eps / static_cast<double>(row.size());
            for (double& p : row) p = (1.0 - eps) * p + u;
        }
    return out;
}

Policy mixture_policy(const std::vector<Policy>& policies, const std::vector<double>& weights) {
    if (policies.empty()) throw std::invalid_argument("mixture_policy: no policies");
    if (policies.size() != weights.size())
        throw std::invalid_argument("mixture_policy: weights size mismatch");
    double total = 0.0;
    for (double w : weights) total += w;
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("mixture_policy: weights must sum to 1");
    Policy out = policies[0];
    for (std::size_t h = 0; h < out.probs.size(); ++h)
        for (std::size_t s = 0; s < out.probs[h].size(); ++s)
            for (std::size_t a = 0; a < out.probs[h][s].size(); ++a) {
                double p = 0.0;
                for (std::size_t k = 0; k < policies.size(); ++k)
                    p += weights[k] * policies[k].probs[h][s][a];
                out.probs[h][s][a] = p;
            }
    return out;
}

Dataset sample_mixture_trajectories(const Mdp& mdp, const std::vector<Policy>& policies,
                                    const std::vector<double>& weights, int n,
                                    std::uint64_t seed) {
    if (policies.empty()) throw std::invalid_argument("sample_mixture_trajectories: no policies");
    if (n < 1) throw std::invalid_argument("sample_mixture_trajectories: n must be >= 1");
    Rng pick(derive_seed(seed, 0x6d6978));
    Dataset out;
    out.horizon = mdp.horizon;
    out.num_actions = mdp.num_actions;
    for (int e = 0; e < n; ++e) {
        const int j = pick.categorical(weights);
        Dataset one = sample_trajectories(mdp, policies[j], 1, derive_seed(seed, e));
        out.trajectories.push_back(std::move(one.trajectories[0]));
    }
    return out;
}

Regime regime_from_string(const std::string& name) {
    if (name == "well_covered") return Regime::well_covered;
    if (name == "well_covered_plus_optimal") return Regime::well_covered_plus_optimal;
    throw std::invalid_argument("unknown regime '" + name + "'");
}

std::string regime_to_string(Regime regime) {
    return regime == Regime::well_covered ? "well_covered" : "well_covered_plus_optimal";
}

Dataset make_ops_dataset(const Mdp& mdp, const CandidateSet& candidates, Regime regime, int n,
                         std::uint64_t seed) {
    if (candidates.entries.empty()) throw std::invalid_argument("make_ops_dataset: no candidates");
    std::vector<Policy> policies;
    for (const auto& entry : candidates.entries) policies.push_back(entry.policy);
    if (regime == Regime::well_covered_plus_optimal)
        policies.push_back(epsilon_greedy(greedy_policy(optimal_q(mdp)), 0.4));
    const std::vector<double> weights(policies.size(), 1.0 / policies.size());
    return sample_mixture_trajectories(mdp, policies, weights, n, seed);
}

namespace {

nlohmann::json q_to_json(const QFunction& q) { return q.table; }

QFunction q_from_json(const nlohmann::json& j) {
    QFunction q;
    q.table = j.get<std::vector<std::vector<std::vector<double>>>>();
    return q;
}

}  // namespace

std::string candidate_set_to_json(const CandidateSet& set) {
    nlohmann::json j;
    j["provenance"] = set.provenance;
    j["entries"] = nlohmann::json::array();
    for (const auto& entry : set.entries) {
        nlohmann::json e;
        e["policy"] = entry.policy.probs;
        e["q"] = q_to_json(entry.q);
        e["hyperparams"] = entry.hyperparams;
        e["train_seed"] = entry.train_seed;
        e["diverged"] = entry.diverged;
        j["entries"].push_back(std::move(e));
    }
    return j.dump(2);
}

CandidateSet candidate_set_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    CandidateSet set;
    set.provenance = j.value("provenance", "");
    for (const auto& e : j.at("entries")) {
        TrainedCandidate entry;
        entry.policy.probs = e.at("policy").get<std::vector<std::vector<std::vector<double>>>>();
        entry.q = q_from_json(e.at("q"));
        entry.hyperparams = e.at("hyperparams").get<std::map<std::string, std::string>>();
        entry.train_seed = e.at("train_seed").get<std::uint64_t>();
        entry.diverged = e.at("diverged").get<bool>();
        set.entries.push_back(std::move(entry));
    }
    if (set.entries.empty())
        throw std::invalid_argument("candidate_set_from_json: empty candidate set");
    return set;
}

void save_candidate_set(const CandidateSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << candidate_set_to_json(set) << '\n';
}

CandidateSet load_candidate_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return candidate_set_from_json(buf.str());
}

}  // namespace opslab
