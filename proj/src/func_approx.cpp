#include "opslab/func_approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "opslab/rng.hpp"

namespace opslab {

CellIndexer CellIndexer::for_mdp(const Mdp& mdp) {
    CellIndexer idx;
    idx.num_actions = mdp.num_actions;
    idx.layer_offset.resize(mdp.horizon);
    int off = 0;
    for (int h = 0; h < mdp.horizon; ++h) {
        idx.layer_offset[h] = off;
        off += mdp.states_per_layer[h] * mdp.num_actions;
    }
    idx.total = off;
    return idx;
}

FeatureMap onehot_features(const Mdp& mdp) {
    const CellIndexer idx = CellIndexer::for_mdp(mdp);
    FeatureMap fm;
    fm.dim = idx.total;
    fm.phi = [idx](int h, int s, int a) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(idx.total);
        x[idx.index(h, s, a)] = 1.0;
        return x;
    };
    return fm;
}

FeatureMap coarse_features(const Mdp& mdp, int group_size) {
    if (group_size < 1) throw std::invalid_argument("coarse_features: group_size must be >= 1");
    std::vector<int> layer_offset(mdp.horizon);
    int off = 0;
    for (int h = 0; h < mdp.horizon; ++h) {
        layer_offset[h] = off;
        const int groups = (mdp.states_per_layer[h] + group_size - 1) / group_size;
        off += groups * mdp.num_actions;
    }
    FeatureMap fm;
    fm.dim = off;
    const int A = mdp.num_actions;
    fm.phi = [layer_offset, group_size, A, dim = off](int h, int s, int a) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        x[layer_offset[h] + (s / group_size) * A + a] = 1.0;
        return x;
    };
    return fm;
}

double MlpParams::forward(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd hidden = (w1 * x + b1).cwiseMax(0.0);
    return w2.dot(hidden) + b2;
}

void MlpParams::accumulate_gradient(const Eigen::VectorXd& x, double t, MlpParams& grad) const {
    const Eigen::VectorXd pre = w1 * x + b1;
    const Eigen::VectorXd hidden = pre.cwiseMax(0.0);
    const double y = w2.dot(hidden) + b2;
    const double dy = 2.0 * (y - t);
    grad.w2 += dy * hidden;
    grad.b2 += dy;
    const Eigen::VectorXd dpre =
        (pre.array() > 0.0).select(dy * w2.array(), 0.0).matrix();
    grad.w1 += dpre * x.transpose();
    grad.b1 += dpre;
}

MlpParams MlpParams::init(int in_dim, int width, double scale, std::uint64_t seed) {
    Rng rng(seed);
    MlpParams p;
    p.w1.resize(width, in_dim);
    p.b1 = Eigen::VectorXd::Zero(width);
    p.w2.resize(width);
    p.b2 = 0.0;
    const double s1 = scale / std::sqrt(std::max(1, in_dim));
    const double s2 = scale / std::sqrt(std::max(1, width));
    for (int i = 0; i < width; ++i)
        for (int j = 0; j < in_dim; ++j) p.w1(i, j) = (rng.next_double() * 2 - 1) * s1;
    for (int i = 0; i < width; ++i) p.w2(i) = (rng.next_double() * 2 - 1) * s2;
    return p;
}

double FittedFunction::eval(const RegInput& in) const {
    switch (kind) {
        case FcKind::tabular: return table[in.cell];
        case FcKind::linear: return weights.dot(in.x);
        case FcKind::mlp: return mlp.forward(in.x);
    }
    return 0.0;
}

std::string FittedFunction::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case FcKind::tabular:
            j["kind"] = "tabular";
            j["table"] = table;
            break;
        case FcKind::linear: {
            j["kind"] = "linear";
            j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
            break;
        }
        case FcKind::mlp: {
            j["kind"] = "mlp";
            j["w1"] = std::vector<double>(mlp.w1.data(), mlp.w1.data() + mlp.w1.size());
            j["b1"] = std::vector<double>(mlp.b1.data(), mlp.b1.data() + mlp.b1.size());
            j["w2"] = std::vector<double>(mlp.w2.data(), mlp.w2.data() + mlp.w2.size());
            j["b2"] = mlp.b2;
            j["hidden_width"] = static_cast<int>(mlp.b1.size());
            break;
        }
    }
    return j.dump();
}

namespace {

FittedFunction fit_tabular(const FunctionClass& cls, const std::vector<RegInput>& inputs,
                           const std::vector<double>& targets) {
    FittedFunction f;
    f.kind = FcKind::tabular;
    f.table.assign(cls.num_cells, 0.0);
    std::vector<double> counts(cls.num_cells, 0.0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const int c = inputs[i].cell;
        if (c < 0 || c >= cls.num_cells)
            throw std::invalid_argument("fit_regression: cell index out of range");
        f.table[c] += targets[i];
        counts[c] += 1.0;
    }
    for (int c = 0; c < cls.num_cells; ++c)
        if (counts[c] > 0.0) f.table[c] /= counts[c];
    f.loss_trace.push_back(mean_squared_loss(f, inputs, targets));
    return f;
}

FittedFunction fit_linear(const FunctionClass& cls, const std::vector<RegInput>& inputs,
                          const std::vector<double>& targets) {
    const int d = cls.feature_dim;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        xtx.noalias() += inputs[i].x * inputs[i].x.transpose();
        xty.noalias() += targets[i] * inputs[i].x;
    }
    // ridge regularization keeps singular systems solvable (min-norm-ish fit)
    const double lambda = cls.ridge_scale * std::max(1.0, xtx.trace() / d);
    xtx.diagonal().array() += lambda;
    FittedFunction f;
    f.kind = FcKind::linear;
    f.weights = xtx.ldlt().solve(xty);
    f.loss_trace.push_back(mean_squared_loss(f, inputs, targets));
    return f;
}

FittedFunction fit_mlp(const FunctionClass& cls, const std::vector<RegInput>& inputs,
                       const std::vector<double>& targets) {
    const TrainOptions& opt = cls.train;
    Rng rng(derive_seed(opt.seed, 0x6d6c70));
    FittedFunction f;
    f.kind = FcKind::mlp;
    f.mlp = MlpParams::init(cls.feature_dim, cls.hidden_width, opt.init_scale, opt.seed);
    const int n = static_cast<int>(inputs.size());
    const int batch = std::min(opt.batch_size, n);
    MlpParams grad = f.mlp;
    for (int step = 0; step < opt.steps; ++step) {
        grad.w1.setZero();
        grad.b1.setZero();
        grad.w2.setZero();
        grad.b2 = 0.0;
        for (int b = 0; b < batch; ++b) {
            const int i = rng.next_int(n);
            f.mlp.accumulate_gradient(inputs[i].x, targets[i], grad);
        }
        const double lr = opt.step_size / batch;
        f.mlp.w1 -= lr * grad.w1;
        f.mlp.b1 -= lr * grad.b1;
        f.mlp.w2 -= lr * grad.w2;
        f.mlp.b2 -= lr * grad.b2;
        if (step % 100 == 0) f.loss_trace.push_back(mean_squared_loss(f, inputs, targets));
    }
    f.loss_trace.push_back(mean_squared_loss(f, inputs, targets));
    return f;
}

}  // namespace

FittedFunction fit_regression(const FunctionClass& cls, const std::vector<RegInput>& inputs,
                              const std::vector<double>& targets) {
    if (inputs.empty()) throw std::invalid_argument("fit_regression: empty training set");
    if (inputs.size() != targets.size())
        throw std::invalid_argument("fit_regression: inputs/targets size mismatch");
    for (double t : targets)
        if (!std::isfinite(t)) throw std::invalid_argument("fit_regression: non-finite target");
    switch (cls.kind) {
        case FcKind::tabular: return fit_tabular(cls, inputs, targets);
        case FcKind::linear: return fit_linear(cls, inputs, targets);
        case FcKind::mlp: return fit_mlp(cls, inputs, targets);
    }
    throw std::logic_error("fit_regression: unknown class kind");
}

double mean_squared_loss(const FittedFunction& f, const std::vector<RegInput>& inputs,
                         const std::vector<double>& targets) {
    if (inputs.empty()) throw std::invalid_argument("mean_squared_loss: empty evaluation set");
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double d = f.eval(inputs[i]) - targets[i];
        total += d * d;
    }
    return total / static_cast<double>(inputs.size());
}

HoldoutResult holdout_validate(const std::vector<FunctionClass>& classes,
                               const std::vector<RegInput>& train_inputs,
                               const std::vector<double>& train_targets,
                               const std::vector<RegInput>& val_inputs,
                               const std::vector<double>& val_targets) {
    if (classes.empty()) throw std::invalid_argument("holdout_validate: no classes");
    if (train_inputs.empty() || val_inputs.empty())
        throw std::invalid_argument("holdout_validate: empty split");
    HoldoutResult result;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < classes.size(); ++m) {
        FittedFunction f = fit_regression(classes[m], train_inputs, train_targets);
        const double loss = mean_squared_loss(f, val_inputs, val_targets);
        result.val_losses.push_back(loss);
        if (loss < best) {  // strict: ties keep the smallest class index
            best = loss;
            result.best_index = static_cast<int>(m);
            result.fitted = std::move(f);
        }
    }
    return result;
}

}  // namespace opslab
