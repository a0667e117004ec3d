#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "opslab/mdp.hpp"

namespace opslab {

// Enumerable regression function classes: tabular (per-cell means), linear
// over features (ridge least squares), and one-hidden-layer ReLU MLPs trained
// by minibatch SGD with a fixed budget.

// Flat cell index over (h, s, a) of a layered MDP; the tabular class operates
// on these.
struct CellIndexer {
    std::vector<int> layer_offset;
    int num_actions = 0;
    int total = 0;

    int index(int h, int s, int a) const { return layer_offset[h] + s * num_actions + a; }
    static CellIndexer for_mdp(const Mdp& mdp);
};

// A regression input carries both views: the flat cell id (for tabular) and a
// feature vector (for linear/MLP).
struct RegInput {
    int cell = 0;
    Eigen::VectorXd x;
};

struct FeatureMap {
    int dim = 0;
    std::function<Eigen::VectorXd(int h, int s, int a)> phi;
};

// Exact indicator features, one per (h, s, a) cell.
FeatureMap onehot_features(const Mdp& mdp);
// Coarsened indicators: states within a layer are pooled in groups of
// `group_size` (actions and layers stay separate).
FeatureMap coarse_features(const Mdp& mdp, int group_size);

enum class FcKind { tabular, linear, mlp };

struct TrainOptions {
    int steps = 2000;
    double step_size = 0.05;
    int batch_size = 64;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
};

struct FunctionClass {
    FcKind kind = FcKind::tabular;
    int num_cells = 0;     // tabular
    int feature_dim = 0;   // linear / mlp input dimension
    int hidden_width = 64; // mlp, typically from {32, 64, 128, 256}
    double ridge_scale = 1e-10;  // linear fallback: lambda = ridge_scale * trace(X'X)/d
    TrainOptions train;
};

struct MlpParams {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;
    double b2 = 0.0;

    double forward(const Eigen::VectorXd& x) const;
    // Gradient of (forward(x) - t)^2 with respect to all parameters, appended
    // in (w1, b1, w2, b2) order. Used by SGD and by finite-difference checks.
    void accumulate_gradient(const Eigen::VectorXd& x, double t, MlpParams& grad) const;
    static MlpParams init(int in_dim, int width, double scale, std::uint64_t seed);
};

class FittedFunction {
  public:
    FcKind kind = FcKind::tabular;
    std::vector<double> table;   // tabular; cells never seen in training stay 0
    Eigen::VectorXd weights;     // linear
    MlpParams mlp;
    std::vector<double> loss_trace;

    double eval(const RegInput& in) const;
    std::string to_json() const;
};

// Squared-loss empirical risk minimization over one class. Tabular and linear
// are solved in closed form; the MLP trains for a fixed SGD budget.
// Deterministic given the class's seed. Throws on empty input.
FittedFunction fit_regression(const FunctionClass& cls, const std::vector<RegInput>& inputs,
                              const std::vector<double>& targets);

double mean_squared_loss(const FittedFunction& f, const std::vector<RegInput>& inputs,
                         const std::vector<double>& targets);

struct HoldoutResult {
    int best_index = 0;
    FittedFunction fitted;
    std::vector<double> val_losses;
};

// Fit every class on the training split and pick the one with the lowest
// validation loss; ties go to the smallest class index.
HoldoutResult holdout_validate(const std::vector<FunctionClass>& classes,
                               const std::vector<RegInput>& train_inputs,
                               const std::vector<double>& train_targets,
                               const std::vector<RegInput>& val_inputs,
                               const std::vector<double>& val_targets);

}  // namespace opslab
