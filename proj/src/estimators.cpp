#include "opslab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace opslab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_support(const Step& st, const Policy& target) {
    if (st.pb <= 0.0 && target.prob(st.h, st.s, st.a) > 0.0) {
        std::ostringstream os;
        os << "importance sampling support violation at (h=" << st.h << ", s=" << st.s
           << ", a=" << st.a << "): target probability "
           << target.prob(st.h, st.s, st.a) << " but recorded behavior probability 0";
        throw std::invalid_argument(os.str());
    }
}

// Full-trajectory weights and returns, shared by IS and WIS.
void trajectory_weights(const Dataset& data, const Policy& target, std::vector<double>& weights,
                        std::vector<double>& returns) {
    for (const auto& traj : data.trajectories) {
        double w = 1.0;
        for (const auto& st : traj.steps) {
            check_support(st, target);
            if (target.prob(st.h, st.s, st.a) == 0.0) {
                w = 0.0;
            } else if (w != 0.0) {
                w *= target.prob(st.h, st.s, st.a) / st.pb;
            }
        }
        weights.push_back(w);
        returns.push_back(traj.ret());
    }
}

void weight_diagnostics(const std::vector<double>& weights, OpeEstimate& est) {
    double sum = 0.0, sum_sq = 0.0, max_w = 0.0;
    for (double w : weights) {
        sum += w;
        sum_sq += w * w;
        max_w = std::max(max_w, w);
    }
    est.diagnostics["n"] = static_cast<double>(weights.size());
    est.diagnostics["max_weight"] = max_w;
    est.diagnostics["ess"] = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
}

}  // namespace

OpeEstimate is_estimate(const Dataset& data, const Policy& target) {
    if (data.trajectories.empty()) throw std::invalid_argument("is_estimate: empty dataset");
    std::vector<double> weights, returns;
    trajectory_weights(data, target, weights, returns);
    OpeEstimate est;
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * returns[i];
    est.value = total / static_cast<double>(weights.size());
    weight_diagnostics(weights, est);
    return est;
}

OpeEstimate wis_estimate(const Dataset& data, const Policy& target) {
    if (data.trajectories.empty()) throw std::invalid_argument("wis_estimate: empty dataset");
    std::vector<double> weights, returns;
    trajectory_weights(data, target, weights, returns);
    OpeEstimate est;
    weight_diagnostics(weights, est);
    double wsum = 0.0, total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        wsum += weights[i];
        total += weights[i] * returns[i];
    }
    if (wsum <= 0.0) {
        est.diverged = true;
        est.value = kNegInf;
        return est;
    }
    est.value = total / wsum;
    return est;
}

OpeEstimate pdis_estimate(const Dataset& data, const Policy& target) {
    if (data.trajectories.empty()) throw std::invalid_argument("pdis_estimate: empty dataset");
    OpeEstimate est;
    double total = 0.0, max_w = 0.0;
    for (const auto& traj : data.trajectories) {
        double prefix = 1.0;
        for (const auto& st : traj.steps) {
            check_support(st, target);
            if (prefix != 0.0) {
                const double p = target.prob(st.h, st.s, st.a);
                prefix = p == 0.0 ? 0.0 : prefix * p / st.pb;
            }
            total += prefix * st.r;
            max_w = std::max(max_w, prefix);
        }
    }
    est.value = total / static_cast<double>(data.trajectories.size());
    est.diagnostics["n"] = static_cast<double>(data.trajectories.size());
    est.diagnostics["max_weight"] = max_w;
    return est;
}

OpeEstimate fqe_with_features(const Mdp& mdp, const Dataset& data, const Policy& target,
                              const FunctionClass& base_cls, const FeatureMap& features,
                              double U) {
    if (data.trajectories.empty()) throw std::invalid_argument("fqe: empty dataset");
    const int H = mdp.horizon;
    const int A = mdp.num_actions;
    const CellIndexer idx = CellIndexer::for_mdp(mdp);

    std::vector<std::vector<const Step*>> by_layer(H);
    for (const auto& traj : data.trajectories)
        for (const auto& st : traj.steps) by_layer[st.h].push_back(&st);
    std::vector<int> missing;
    for (int h = 0; h < H; ++h)
        if (by_layer[h].empty()) missing.push_back(h);
    if (!missing.empty()) {
        std::ostringstream os;
        os << "fqe: no transitions for layer(s)";
        for (int h : missing) os << ' ' << h;
        throw std::invalid_argument(os.str());
    }

    OpeEstimate est;
    const bool tabular = base_cls.kind == FcKind::tabular;
    // q values for the layer above the one being fitted
    std::vector<std::vector<double>> q_next;
    std::vector<std::vector<double>> q_cur;
    bool bad = false;
    int iterations = 0;
    for (int h = H - 1; h >= 0 && !bad; --h) {
        std::vector<RegInput> inputs;
        std::vector<double> targets;
        for (const Step* st : by_layer[h]) {
            RegInput in;
            in.cell = idx.index(st->h, st->s, st->a);
            if (!tabular) in.x = features.phi(st->h, st->s, st->a);
            inputs.push_back(std::move(in));
            double v_next = 0.0;
            if (h + 1 < H)
                for (int a = 0; a < A; ++a)
                    v_next += target.prob(h + 1, st->sp, a) * q_next[st->sp][a];
            targets.push_back(st->r + v_next);
        }
        for (double t : targets)
            if (!std::isfinite(t)) bad = true;
        if (bad) break;
        FunctionClass cls = base_cls;
        if (tabular) cls.num_cells = idx.total;
        const FittedFunction fit = fit_regression(cls, inputs, targets);
        ++iterations;
        q_cur.assign(mdp.states_per_layer[h], std::vector<double>(A, 0.0));
        for (int s = 0; s < mdp.states_per_layer[h]; ++s)
            for (int a = 0; a < A; ++a) {
                RegInput in;
                in.cell = idx.index(h, s, a);
                if (!tabular) in.x = features.phi(h, s, a);
                q_cur[s][a] = fit.eval(in);
                if (!std::isfinite(q_cur[s][a])) bad = true;
            }
        q_next = q_cur;
    }
    est.diagnostics["iterations"] = static_cast<double>(iterations);
    if (bad) {
        est.diverged = true;
        est.value = kNegInf;
        return est;
    }
    double j = 0.0;
    for (int a = 0; a < A; ++a) j += target.prob(0, mdp.initial_state, a) * q_cur[mdp.initial_state][a];
    if (!std::isfinite(j) || j > U) {
        est.diverged = true;
        est.value = kNegInf;
        est.diagnostics["raw_estimate"] = j;
        return est;
    }
    est.value = j;
    return est;
}

OpeEstimate fqe(const Mdp& mdp, const Dataset& data, const Policy& target,
                const std::string& class_name, double U) {
    const double threshold = U < 0.0 ? mdp.v_max() + 100.0 : U;
    FunctionClass cls;
    FeatureMap features;
    if (class_name == "tabular") {
        cls.kind = FcKind::tabular;
    } else if (class_name == "linear-fine" || class_name == "linear-coarse") {
        cls.kind = FcKind::linear;
        features = class_name == "linear-fine" ? onehot_features(mdp) : coarse_features(mdp, 2);
        cls.feature_dim = features.dim;
    } else {
        throw std::invalid_argument("fqe: unknown class '" + class_name + "'");
    }
    return fqe_with_features(mdp, data, target, cls, features, threshold);
}

SelectionReport ops_by_estimate(const CandidateSet& candidates, const Estimator& estimator,
                                const std::string& method_name, int top_k) {
    if (candidates.entries.empty()) throw std::invalid_argument("ops_by_estimate: no candidates");
    if (top_k < 1 || top_k > static_cast<int>(candidates.entries.size()))
        throw std::invalid_argument("ops_by_estimate: top_k out of range");
    SelectionReport report;
    report.method = method_name;
    std::vector<bool> diverged;
    for (const auto& entry : candidates.entries) {
        const OpeEstimate est = estimator(entry);
        report.scores.push_back(est.value);
        diverged.push_back(est.diverged);
    }
    report.ranking.resize(report.scores.size());
    std::iota(report.ranking.begin(), report.ranking.end(), 0);
    std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
        if (diverged[a] != diverged[b]) return !diverged[a];
        if (report.scores[a] != report.scores[b]) return report.scores[a] > report.scores[b];
        return a < b;
    });
    report.chosen.assign(report.ranking.begin(), report.ranking.begin() + top_k);
    return report;
}

Estimator make_estimator(const std::string& method, const Mdp& mdp, const Dataset& data) {
    if (method == "is")
        return [&mdp, &data](const TrainedCandidate& c) { return is_estimate(data, c.policy); };
    if (method == "wis")
        return [&mdp, &data](const TrainedCandidate& c) { return wis_estimate(data, c.policy); };
    if (method == "pdis")
        return [&mdp, &data](const TrainedCandidate& c) { return pdis_estimate(data, c.policy); };
    if (method.rfind("fqe", 0) == 0) {
        std::string class_name = "tabular";
        double U = -1.0;
        const auto open = method.find('(');
        if (open != std::string::npos) {
            std::string args = method.substr(open + 1, method.rfind(')') - open - 1);
            std::istringstream in(args);
            std::string kv;
            while (std::getline(in, kv, ',')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("make_estimator: malformed option '" + kv + "'");
                const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
                if (key == "class")
                    class_name = val;
                else if (key == "U")
                    U = val == "auto" ? -1.0 : std::stod(val);
                else
                    throw std::invalid_argument("make_estimator: unknown option '" + key + "'");
            }
        }
        return [&mdp, &data, class_name, U](const TrainedCandidate& c) {
            return fqe(mdp, data, c.policy, class_name, U);
        };
    }
    throw std::invalid_argument("make_estimator: unknown method '" + method + "'");
}

}  // namespace opslab
