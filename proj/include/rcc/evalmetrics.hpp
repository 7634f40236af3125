#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcc/schema.hpp"

namespace rcc {

// Numeric row matrices used by the privacy metrics.
using Matrix = std::vector<std::vector<double>>;

// Embeds mixed rows into a numeric space for distance computations:
// continuous columns min-max scaled by the reference table's ranges,
// categorical columns one-hot scaled so any category mismatch contributes
// exactly 1 to the squared distance. Throws on null fields.
Matrix mixed_embedding(const Table& table, const Table& reference);

// Mean ratio of nearest to second-nearest real-neighbor distance over the
// synthetic rows; 0/0 ratios count as 0. Always lands in [0, 1].
double nndr(const Matrix& synth, const Matrix& real);

// Fraction of synthetic rows with an exact real duplicate (componentwise
// tolerance for continuous values).
double ims(const Matrix& synth, const Matrix& real, double tol = 1e-12);
double ims_table(const Table& synth, const Table& real, double tol = 1e-12);

struct DcrResult {
    double value = 0.0;
    bool degenerate = false;  // all nearest distances equal
};

// Mean of min-max normalized nearest-real-neighbor distances.
DcrResult dcr(const Matrix& synth, const Matrix& real);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Total variation distance between the empirical category frequencies.
double tv_distance(const std::vector<int>& a, const std::vector<int>& b,
                   size_t n_categories);

struct ColumnDistance {
    std::string name;
    ColumnKind kind;
    double value;  // KS for continuous, TV for categorical
};

std::vector<ColumnDistance> marginal_distances(const Table& real,
                                               const Table& synth);

// CART-style decision tree classifier with Gini splits.
struct DecisionTree {
    struct TreeNode {
        int feature = -1;
        double threshold = 0.0;
        int left = -1, right = -1;
        int label = -1;  // leaf when feature < 0
    };
    std::vector<TreeNode> nodes;
    int n_classes = 0;

    int predict(const std::vector<double>& x) const;
};

DecisionTree fit_tree(const Matrix& x, const std::vector<int>& y,
                      int n_classes, int max_depth);

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred,
                int n_classes);

struct RegressScore {
    double r2 = 0.0;
    double mse = 0.0;
    double mae = 0.0;
};

struct EfficacyProtocol {
    double train_ratio = 0.7;
    int folds = 5;
    int tree_depth = 20;
    int poly_degree = 2;
    uint64_t seed = 0;
};

// Trains a depth-limited tree on `train` and scores macro-F1 on `test`.
// The target must be a categorical column present in both schemas.
double tree_macro_f1(const Table& train, const Table& test,
                     const std::string& target, int max_depth);

// Least-squares polynomial regression (all monomials of the continuous
// features up to the given total degree, plus categorical one-hots), with a
// ridge fallback when the system is rank-deficient.
RegressScore poly_regression_score(const Table& train, const Table& test,
                                   const std::string& target, int degree);

struct EfficacyReport {
    std::string target;
    bool classification = false;
    double holdout_score = 0.0;       // macro-F1 or R^2 on the holdout split
    std::vector<double> fold_scores;  // k-fold CV inside the training split
    double cv_mean = 0.0;
    RegressScore regress;  // populated for regression targets
};

// Standard protocol: split `table` 70/30, train on the 70% (k-fold CV
// inside it), score on the 30% holdout.
EfficacyReport ml_efficacy(const Table& table, const std::string& target,
                           const EfficacyProtocol& protocol);

// Cross-table variant: train on `train_table`, evaluate on `holdout`.
EfficacyReport ml_efficacy_cross(const Table& train_table, const Table& holdout,
                                 const std::string& target,
                                 const EfficacyProtocol& protocol);

}  // namespace rcc
