#include "opslab/be_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "opslab/estimators.hpp"
#include "opslab/func_approx.hpp"
#include "opslab/rng.hpp"

namespace opslab {

namespace {

double v_next(const QFunction& q, const Step& st, int horizon) {
    return st.h + 1 < horizon ? q.state_value(st.h + 1, st.sp) : 0.0;
}

struct AuxSetup {
    FunctionClass cls;
    FeatureMap features;
    CellIndexer idx;
    bool tabular = false;
};

AuxSetup aux_class(const Mdp& mdp, const std::string& name) {
    AuxSetup setup;
    setup.idx = CellIndexer::for_mdp(mdp);
    if (name == "tabular") {
        setup.cls.kind = FcKind::tabular;
        setup.cls.num_cells = setup.idx.total;
        setup.tabular = true;
    } else if (name == "linear-fine" || name == "linear-coarse") {
        setup.cls.kind = FcKind::linear;
        setup.features = name == "linear-fine" ? onehot_features(mdp) : coarse_features(mdp, 2);
        setup.cls.feature_dim = setup.features.dim;
    } else {
        throw std::invalid_argument("unknown auxiliary class '" + name + "'");
    }
    return setup;
}

RegInput make_input(const AuxSetup& setup, const Step& st) {
    RegInput in;
    in.cell = setup.idx.index(st.h, st.s, st.a);
    if (!setup.tabular) in.x = setup.features.phi(st.h, st.s, st.a);
    return in;
}

struct AuxData {
    std::vector<RegInput> inputs;
    std::vector<double> targets;  // regression targets (delta or r + v_q(s'))
    std::vector<double> deltas;   // r + v_q(s') - q(s,a)
    std::vector<double> qvals;    // q(s,a)
};

AuxData collect(const AuxSetup& setup, const Mdp& mdp, const Dataset& data, const QFunction& q,
                BeTargetMode mode) {
    AuxData out;
    for (const auto& traj : data.trajectories)
        for (const auto& st : traj.steps) {
            const double qv = q.value(st.h, st.s, st.a);
            const double delta = st.r + v_next(q, st, mdp.horizon) - qv;
            out.inputs.push_back(make_input(setup, st));
            out.targets.push_back(mode == BeTargetMode::be ? delta : st.r + v_next(q, st, mdp.horizon));
            out.deltas.push_back(delta);
            out.qvals.push_back(qv);
        }
    return out;
}

// Shared holdout machinery: fit every class on fit_data, pick the class with
// the lowest regression loss on choice_data, then compute the final score on
// score_data with the winning fit.
template <typename ScoreFn>
BeScore holdout_score(const Mdp& mdp, const Dataset& fit_data, const Dataset& choice_data,
                      const Dataset& score_data, const QFunction& q,
                      const std::vector<std::string>& classes, BeTargetMode mode,
                      ScoreFn&& final_score) {
    if (classes.empty()) throw std::invalid_argument("be score: empty class list");
    if (fit_data.trajectories.empty() || choice_data.trajectories.empty() ||
        score_data.trajectories.empty())
        throw std::invalid_argument("be score: empty data split");

    BeScore best;
    FittedFunction best_fit;
    AuxSetup best_setup;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < classes.size(); ++m) {
        const AuxSetup setup = aux_class(mdp, classes[m]);
        const AuxData train = collect(setup, mdp, fit_data, q, mode);
        const AuxData choice = collect(setup, mdp, choice_data, q, mode);
        const FittedFunction fit = fit_regression(setup.cls, train.inputs, train.targets);
        const double loss = mean_squared_loss(fit, choice.inputs, choice.targets);
        if (loss < best_loss) {
            best_loss = loss;
            best.selected_class_index = static_cast<int>(m);
            best.train_loss = mean_squared_loss(fit, train.inputs, train.targets);
            best.val_loss = loss;
            best_fit = fit;
            best_setup = setup;
        }
    }
    const AuxData score = collect(best_setup, mdp, score_data, q, mode);
    best.score = final_score(best_fit, score);
    return best;
}

double minimax_final_score(BeTargetMode mode, const FittedFunction& fit, const AuxData& score) {
    double total = 0.0;
    const double n = static_cast<double>(score.inputs.size());
    if (mode == BeTargetMode::be) {
        for (std::size_t i = 0; i < score.inputs.size(); ++i) {
            const double h = fit.eval(score.inputs[i]);
            total += 2.0 * h * score.deltas[i] - h * h;
        }
    } else {
        for (std::size_t i = 0; i < score.inputs.size(); ++i) {
            const double g = fit.eval(score.inputs[i]);
            const double residual = g - score.targets[i];
            total += score.deltas[i] * score.deltas[i] - residual * residual;
        }
    }
    return total / n;
}

SelectionReport report_by_ascending_scores(std::string method, std::vector<double> scores,
                                           int top_k, std::uint64_t seed) {
    if (top_k < 1 || top_k > static_cast<int>(scores.size()))
        throw std::invalid_argument(method + ": top_k out of range");
    SelectionReport report;
    report.method = std::move(method);
    report.scores = std::move(scores);
    report.seed = seed;
    report.ranking.resize(report.scores.size());
    std::iota(report.ranking.begin(), report.ranking.end(), 0);
    std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
        if (report.scores[a] != report.scores[b]) return report.scores[a] < report.scores[b];
        return a < b;
    });
    report.chosen.assign(report.ranking.begin(), report.ranking.begin() + top_k);
    return report;
}

}  // namespace

double tde_score(const Dataset& data, const QFunction& q) {
    if (data.trajectories.empty()) throw std::invalid_argument("tde_score: empty dataset");
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& traj : data.trajectories)
        for (const auto& st : traj.steps) {
            const double v = st.h + 1 < data.horizon ? q.state_value(st.h + 1, st.sp) : 0.0;
            const double d = q.value(st.h, st.s, st.a) - st.r - v;
            total += d * d;
            ++n;
        }
    return total / static_cast<double>(n);
}

BeTargetMode be_target_mode_from_string(const std::string& name) {
    if (name == "be") return BeTargetMode::be;
    if (name == "tq") return BeTargetMode::tq;
    throw std::invalid_argument("unknown BE target mode '" + name + "'");
}

BeScore minimax_be_score(const Mdp& mdp, const Dataset& data_fit, const Dataset& data_score,
                         const QFunction& q, const std::vector<std::string>& classes,
                         BeTargetMode mode) {
    return holdout_score(mdp, data_fit, data_score, data_score, q, classes, mode,
                         [mode](const FittedFunction& fit, const AuxData& score) {
                             return minimax_final_score(mode, fit, score);
                         });
}

BeScore sbv_score(const Mdp& mdp, const Dataset& data_fit, const Dataset& data_score,
                  const QFunction& q, const std::vector<std::string>& classes) {
    return holdout_score(mdp, data_fit, data_score, data_score, q, classes, BeTargetMode::tq,
                         [](const FittedFunction& fit, const AuxData& score) {
                             double total = 0.0;
                             for (std::size_t i = 0; i < score.inputs.size(); ++i) {
                                 const double d = score.qvals[i] - fit.eval(score.inputs[i]);
                                 total += d * d;
                             }
                             return total / static_cast<double>(score.inputs.size());
                         });
}

std::pair<Dataset, Dataset> split_episodes(const Dataset& data, double train_ratio,
                                           std::uint64_t seed) {
    const int n = static_cast<int>(data.trajectories.size());
    if (train_ratio <= 0.0 || train_ratio >= 1.0)
        throw std::invalid_argument("split_episodes: train_ratio must be in (0, 1)");
    if (n < 2) throw std::invalid_argument("split_episodes: need at least 2 episodes");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x73706c6974));
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.next_int(i + 1)]);
    const int n_train = std::clamp(static_cast<int>(std::floor(train_ratio * n)), 1, n - 1);
    Dataset train, val;
    train.horizon = val.horizon = data.horizon;
    train.num_actions = val.num_actions = data.num_actions;
    for (int i = 0; i < n; ++i)
        (i < n_train ? train : val).trajectories.push_back(data.trajectories[order[i]]);
    return {std::move(train), std::move(val)};
}

namespace {

template <typename ScorerFn>
SelectionReport select_with_split(const std::string& method, const Mdp& mdp,
                                  const CandidateSet& candidates, const Dataset& data,
                                  const IbesConfig& cfg, std::uint64_t seed, int top_k,
                                  ScorerFn&& scorer) {
    if (candidates.entries.empty()) throw std::invalid_argument(method + ": no candidates");
    const auto [train, val] = split_episodes(data, cfg.split_ratio, seed);
    const Dataset& score_data = cfg.score_on_validation ? val : train;
    std::vector<double> scores;
    std::vector<BeScore> details;
    for (const auto& entry : candidates.entries) {
        BeScore s = scorer(entry, train, val, score_data);
        s.candidate_index = static_cast<int>(scores.size());
        scores.push_back(s.score);
        details.push_back(s);
    }
    SelectionReport report = report_by_ascending_scores(method, std::move(scores), top_k, seed);
    report.config["split_ratio"] = std::to_string(cfg.split_ratio);
    report.config["target_mode"] = cfg.target_mode == BeTargetMode::be ? "be" : "tq";
    report.config["score_split"] = cfg.score_on_validation ? "validation" : "train";
    for (const auto& d : details)
        report.config["class[" + std::to_string(d.candidate_index) + "]"] =
            std::to_string(d.selected_class_index);
    return report;
}

}  // namespace

SelectionReport ibes_select(const Mdp& mdp, const CandidateSet& candidates, const Dataset& data,
                            const IbesConfig& cfg, std::uint64_t seed, int top_k) {
    return select_with_split(
        "ibes", mdp, candidates, data, cfg, seed, top_k,
        [&](const TrainedCandidate& entry, const Dataset& train, const Dataset& val,
            const Dataset& score_data) {
            return holdout_score(mdp, train, val, score_data, entry.q, cfg.classes,
                                 cfg.target_mode,
                                 [&](const FittedFunction& fit, const AuxData& score) {
                                     return minimax_final_score(cfg.target_mode, fit, score);
                                 });
        });
}

SelectionReport sbv_select(const Mdp& mdp, const CandidateSet& candidates, const Dataset& data,
                           const IbesConfig& cfg, std::uint64_t seed, int top_k) {
    return select_with_split(
        "sbv", mdp, candidates, data, cfg, seed, top_k,
        [&](const TrainedCandidate& entry, const Dataset& train, const Dataset& val,
            const Dataset& score_data) {
            return holdout_score(mdp, train, val, score_data, entry.q, cfg.classes,
                                 BeTargetMode::tq,
                                 [&](const FittedFunction& fit, const AuxData& score) {
                                     double total = 0.0;
                                     for (std::size_t i = 0; i < score.inputs.size(); ++i) {
                                         const double d =
                                             score.qvals[i] - fit.eval(score.inputs[i]);
                                         total += d * d;
                                     }
                                     return total / static_cast<double>(score.inputs.size());
                                 });
        });
}

SelectionReport tde_select(const CandidateSet& candidates, const Dataset& data, int top_k) {
    if (candidates.entries.empty()) throw std::invalid_argument("tde_select: no candidates");
    std::vector<double> scores;
    for (const auto& entry : candidates.entries) scores.push_back(tde_score(data, entry.q));
    return report_by_ascending_scores("tde", std::move(scores), top_k, 0);
}

SelectionReport two_stage_select(const Mdp& mdp, const CandidateSet& candidates,
                                 const Dataset& data, const TwoStageConfig& cfg,
                                 std::uint64_t seed) {
    const int total = static_cast<int>(candidates.entries.size());
    if (cfg.k2 < 1 || cfg.k2 > cfg.k1 || cfg.k1 > total)
        throw std::invalid_argument("two_stage_select: need 1 <= k2 <= k1 <= |candidates|");
    const SelectionReport stage1 = ops_by_estimate(
        candidates,
        [&](const TrainedCandidate& c) { return fqe(mdp, data, c.policy, cfg.fqe_class, cfg.fqe_U); },
        "fqe", cfg.k1);

    CandidateSet survivors;
    for (int idx : stage1.chosen) survivors.entries.push_back(candidates.entries[idx]);
    const SelectionReport stage2 =
        ibes_select(mdp, survivors, data, cfg.ibes, seed, cfg.k2);

    SelectionReport report;
    report.method = "fqe+ibes";
    report.seed = seed;
    report.scores = stage2.scores;  // IBES scores of the k1 survivors, stage-1 order
    for (int local : stage2.ranking) report.ranking.push_back(stage1.chosen[local]);
    for (int i = cfg.k1; i < total; ++i) report.ranking.push_back(stage1.ranking[i]);
    report.chosen.assign(report.ranking.begin(), report.ranking.begin() + cfg.k2);
    report.config["k1"] = std::to_string(cfg.k1);
    report.config["k2"] = std::to_string(cfg.k2);
    report.config["fqe_class"] = cfg.fqe_class;
    return report;
}

}  // namespace opslab
