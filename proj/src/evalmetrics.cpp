#include "rcc/evalmetrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "rcc/rng.hpp"

namespace rcc {

namespace {

void check_same_schema(const Table& a, const Table& b, const char* what) {
    if (a.schema.size() != b.schema.size())
        throw std::invalid_argument(std::string(what) + ": schema width mismatch");
    for (size_t c = 0; c < a.schema.size(); ++c)
        if (a.schema[c].name != b.schema[c].name ||
            a.schema[c].kind != b.schema[c].kind)
            throw std::invalid_argument(std::string(what) + ": schema mismatch at column " +
                                        a.schema[c].name);
}

double euclid2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

Matrix mixed_embedding(const Table& table, const Table& reference) {
    check_same_schema(table, reference, "mixed_embedding");
    const size_t nc = table.schema.size();
    // per continuous column: (min, span) from the reference rows
    std::vector<std::pair<double, double>> ranges(nc, {0.0, 1.0});
    for (size_t c = 0; c < nc; ++c) {
        if (table.schema[c].kind != ColumnKind::Continuous) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& row : reference.rows) {
            if (row[c].is_null())
                throw std::invalid_argument("mixed_embedding: null field");
            lo = std::min(lo, row[c].real_value());
            hi = std::max(hi, row[c].real_value());
        }
        ranges[c] = {lo, hi > lo ? hi - lo : 1.0};
    }
    const double cat_scale = 1.0 / std::sqrt(2.0);
    Matrix out;
    out.reserve(table.row_count());
    for (const auto& row : table.rows) {
        std::vector<double> v;
        for (size_t c = 0; c < nc; ++c) {
            if (row[c].is_null())
                throw std::invalid_argument("mixed_embedding: null field");
            if (table.schema[c].kind == ColumnKind::Continuous) {
                v.push_back((row[c].real_value() - ranges[c].first) /
                            ranges[c].second);
            } else {
                const size_t k = table.schema[c].categories.size();
                const int idx = row[c].category_index();
                for (size_t j = 0; j < k; ++j)
                    v.push_back(static_cast<int>(j) == idx ? cat_scale : 0.0);
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

double nndr(const Matrix& synth, const Matrix& real) {
    if (synth.empty()) throw std::invalid_argument("nndr: empty synthetic set");
    if (real.size() < 2)
        throw std::invalid_argument("nndr: need at least two real rows");
    double total = 0.0;
    for (const auto& s : synth) {
        double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
        for (const auto& r : real) {
            const double d = euclid2(s, r);
            if (d < d1) {
                d2 = d1;
                d1 = d;
            } else if (d < d2) {
                d2 = d;
            }
        }
        total += d2 == 0.0 ? 0.0 : std::sqrt(d1) / std::sqrt(d2);
    }
    return total / static_cast<double>(synth.size());
}

double ims(const Matrix& synth, const Matrix& real, double tol) {
    if (synth.empty()) throw std::invalid_argument("ims: empty synthetic set");
    size_t matched = 0;
    for (const auto& s : synth) {
        for (const auto& r : real) {
            if (s.size() != r.size())
                throw std::invalid_argument("ims: row width mismatch");
            bool eq = true;
            for (size_t i = 0; i < s.size() && eq; ++i)
                eq = std::fabs(s[i] - r[i]) <= tol;
            if (eq) {
                ++matched;
                break;
            }
        }
    }
    return static_cast<double>(matched) / static_cast<double>(synth.size());
}

double ims_table(const Table& synth, const Table& real, double tol) {
    check_same_schema(synth, real, "ims_table");
    if (synth.rows.empty()) throw std::invalid_argument("ims_table: empty synthetic set");
    size_t matched = 0;
    for (const auto& s : synth.rows) {
        for (const auto& r : real.rows) {
            bool eq = true;
            for (size_t c = 0; c < s.size() && eq; ++c) {
                if (s[c].is_real() && r[c].is_real())
                    eq = std::fabs(s[c].real_value() - r[c].real_value()) <= tol;
                else
                    eq = s[c] == r[c];
            }
            if (eq) {
                ++matched;
                break;
            }
        }
    }
    return static_cast<double>(matched) / static_cast<double>(synth.rows.size());
}

DcrResult dcr(const Matrix& synth, const Matrix& real) {
    if (synth.empty()) throw std::invalid_argument("dcr: empty synthetic set");
    if (real.empty()) throw std::invalid_argument("dcr: empty real set");
    std::vector<double> nearest;
    nearest.reserve(synth.size());
    for (const auto& s : synth) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : real) best = std::min(best, euclid2(s, r));
        nearest.push_back(std::sqrt(best));
    }
    const auto [lo_it, hi_it] = std::minmax_element(nearest.begin(), nearest.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return {0.0, true};
    double sum = 0.0;
    for (const double d : nearest) sum += (d - lo) / (hi - lo);
    return {sum / static_cast<double>(nearest.size()), false};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na -
                                  static_cast<double>(j) / nb));
    }
    return d;
}

double tv_distance(const std::vector<int>& a, const std::vector<int>& b,
                   size_t n_categories) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("tv_distance: empty sample");
    std::vector<double> pa(n_categories, 0.0), pb(n_categories, 0.0);
    for (const int v : a) {
        if (v < 0 || static_cast<size_t>(v) >= n_categories)
            throw std::invalid_argument("tv_distance: category out of range");
        pa[v] += 1.0 / static_cast<double>(a.size());
    }
    for (const int v : b) {
        if (v < 0 || static_cast<size_t>(v) >= n_categories)
            throw std::invalid_argument("tv_distance: category out of range");
        pb[v] += 1.0 / static_cast<double>(b.size());
    }
    double tv = 0.0;
    for (size_t k = 0; k < n_categories; ++k) tv += std::fabs(pa[k] - pb[k]);
    return 0.5 * tv;
}

std::vector<ColumnDistance> marginal_distances(const Table& real,
                                               const Table& synth) {
    check_same_schema(real, synth, "marginal_distances");
    std::vector<ColumnDistance> out;
    for (size_t c = 0; c < real.schema.size(); ++c) {
        const auto& col = real.schema[c];
        if (col.kind == ColumnKind::Continuous) {
            std::vector<double> a, b;
            for (const auto& row : real.rows) a.push_back(row[c].real_value());
            for (const auto& row : synth.rows) b.push_back(row[c].real_value());
            out.push_back({col.name, col.kind, ks_statistic(std::move(a), std::move(b))});
        } else {
            std::vector<int> a, b;
            for (const auto& row : real.rows) a.push_back(row[c].category_index());
            for (const auto& row : synth.rows) b.push_back(row[c].category_index());
            out.push_back({col.name, col.kind,
                           tv_distance(a, b, col.categories.size())});
        }
    }
    return out;
}

int DecisionTree::predict(const std::vector<double>& x) const {
    if (nodes.empty()) throw std::logic_error("DecisionTree: empty tree");
    int idx = 0;
    while (nodes[idx].feature >= 0)
        idx = x[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left
                                                            : nodes[idx].right;
    return nodes[idx].label;
}

namespace {

double gini(const std::vector<size_t>& counts, size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (const size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

int majority(const std::vector<size_t>& counts) {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                            counts.begin());
}

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    int n_classes;
    int max_depth;
    DecisionTree tree;

    int build(std::vector<size_t> idx, int depth) {
        std::vector<size_t> counts(n_classes, 0);
        for (const size_t i : idx) ++counts[y[i]];
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[node_id].label = majority(counts);
        const double node_gini = gini(counts, idx.size());
        if (depth >= max_depth || idx.size() < 2 || node_gini == 0.0)
            return node_id;

        const size_t p = x[0].size();
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (size_t f = 0; f < p; ++f) {
            std::vector<size_t> order = idx;
            std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return x[a][f] < x[b][f];
            });
            std::vector<size_t> left(n_classes, 0);
            std::vector<size_t> right = counts;
            for (size_t k = 0; k + 1 < order.size(); ++k) {
                const int cls = y[order[k]];
                ++left[cls];
                --right[cls];
                const double v = x[order[k]][f], nxt = x[order[k + 1]][f];
                if (v == nxt) continue;
                const size_t nl = k + 1, nr = order.size() - nl;
                const double split_gini =
                    (static_cast<double>(nl) * gini(left, nl) +
                     static_cast<double>(nr) * gini(right, nr)) /
                    static_cast<double>(order.size());
                const double gain = node_gini - split_gini;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (v + nxt);
                }
            }
        }
        if (best_feature < 0) return node_id;

        std::vector<size_t> li, ri;
        for (const size_t i : idx)
            (x[i][best_feature] <= best_threshold ? li : ri).push_back(i);
        if (li.empty() || ri.empty()) return node_id;
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        const int l = build(std::move(li), depth + 1);
        tree.nodes[node_id].left = l;
        const int r = build(std::move(ri), depth + 1);
        tree.nodes[node_id].right = r;
        return node_id;
    }
};

}  // namespace

DecisionTree fit_tree(const Matrix& x, const std::vector<int>& y, int n_classes,
                      int max_depth) {
    if (x.empty() || x.size() != y.size())
        throw std::invalid_argument("fit_tree: bad training data");
    if (n_classes < 2) throw std::invalid_argument("fit_tree: need >= 2 classes");
    TreeBuilder builder{x, y, n_classes, max_depth, {}};
    builder.tree.n_classes = n_classes;
    std::vector<size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    builder.build(std::move(idx), 0);
    return std::move(builder.tree);
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred,
                int n_classes) {
    if (truth.empty() || truth.size() != pred.size())
        throw std::invalid_argument("macro_f1: bad inputs");
    double total = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        size_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            const bool t = truth[i] == c, p = pred[i] == c;
            tp += t && p;
            fp += !t && p;
            fn += t && !p;
        }
        const double denom = static_cast<double>(2 * tp + fp + fn);
        total += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    }
    return total / static_cast<double>(n_classes);
}

namespace {

struct FeatureSplit {
    std::vector<size_t> continuous;   // column indices
    std::vector<size_t> categorical;  // column indices
    int target = -1;
};

FeatureSplit split_features(const Table& table, const std::string& target) {
    FeatureSplit fs;
    fs.target = table.column_index(target);
    if (fs.target < 0)
        throw std::invalid_argument("unknown target column: " + target);
    for (size_t c = 0; c < table.schema.size(); ++c) {
        if (static_cast<int>(c) == fs.target) continue;
        if (table.schema[c].kind == ColumnKind::Continuous)
            fs.continuous.push_back(c);
        else
            fs.categorical.push_back(c);
    }
    return fs;
}

Matrix plain_features(const Table& table, const FeatureSplit& fs) {
    Matrix out;
    out.reserve(table.row_count());
    for (const auto& row : table.rows) {
        std::vector<double> v;
        for (const size_t c : fs.continuous) {
            if (row[c].is_null())
                throw std::invalid_argument("ml efficacy: null field");
            v.push_back(row[c].real_value());
        }
        for (const size_t c : fs.categorical) {
            if (row[c].is_null())
                throw std::invalid_argument("ml efficacy: null field");
            const size_t k = table.schema[c].categories.size();
            for (size_t j = 0; j < k; ++j)
                v.push_back(static_cast<int>(j) == row[c].category_index() ? 1.0
                                                                           : 0.0);
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<int> label_column(const Table& table, int col) {
    std::vector<int> y;
    y.reserve(table.row_count());
    for (const auto& row : table.rows) {
        if (row[col].is_null())
            throw std::invalid_argument("ml efficacy: null target");
        y.push_back(row[col].category_index());
    }
    return y;
}

// All monomial exponent vectors with 1 <= total degree <= degree.
void enumerate_monomials(size_t p, int degree, std::vector<int>& current,
                         int remaining, size_t pos,
                         std::vector<std::vector<int>>& out) {
    if (pos == p) {
        if (remaining < degree) out.push_back(current);
        return;
    }
    for (int e = 0; e <= remaining; ++e) {
        current[pos] = e;
        enumerate_monomials(p, degree, current, remaining - e, pos + 1, out);
    }
    current[pos] = 0;
}

Matrix poly_design(const Table& table, const FeatureSplit& fs, int degree,
                   const std::vector<std::vector<int>>& monomials) {
    Matrix out;
    out.reserve(table.row_count());
    for (const auto& row : table.rows) {
        std::vector<double> v;
        v.push_back(1.0);  // intercept
        std::vector<double> cont;
        for (const size_t c : fs.continuous) {
            if (row[c].is_null())
                throw std::invalid_argument("ml efficacy: null field");
            cont.push_back(row[c].real_value());
        }
        for (const auto& expo : monomials) {
            double term = 1.0;
            for (size_t i = 0; i < expo.size(); ++i)
                for (int e = 0; e < expo[i]; ++e) term *= cont[i];
            v.push_back(term);
        }
        for (const size_t c : fs.categorical) {
            if (row[c].is_null())
                throw std::invalid_argument("ml efficacy: null field");
            const size_t k = table.schema[c].categories.size();
            for (size_t j = 0; j < k; ++j)
                v.push_back(static_cast<int>(j) == row[c].category_index() ? 1.0
                                                                           : 0.0);
        }
        out.push_back(std::move(v));
    }
    (void)degree;
    return out;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd out(m.size(), m.empty() ? 0 : m[0].size());
    for (size_t i = 0; i < m.size(); ++i)
        for (size_t j = 0; j < m[i].size(); ++j)
            out(static_cast<long>(i), static_cast<long>(j)) = m[i][j];
    return out;
}

}  // namespace

double tree_macro_f1(const Table& train, const Table& test,
                     const std::string& target, int max_depth) {
    check_same_schema(train, test, "tree_macro_f1");
    const FeatureSplit fs = split_features(train, target);
    if (train.schema[fs.target].kind == ColumnKind::Continuous)
        throw std::invalid_argument("tree_macro_f1: target must be categorical");
    const int n_classes =
        static_cast<int>(train.schema[fs.target].categories.size());
    const DecisionTree tree = fit_tree(plain_features(train, fs),
                                       label_column(train, fs.target),
                                       n_classes, max_depth);
    const Matrix xt = plain_features(test, fs);
    std::vector<int> pred;
    pred.reserve(xt.size());
    for (const auto& row : xt) pred.push_back(tree.predict(row));
    return macro_f1(label_column(test, fs.target), pred, n_classes);
}

RegressScore poly_regression_score(const Table& train, const Table& test,
                                   const std::string& target, int degree) {
    check_same_schema(train, test, "poly_regression_score");
    if (degree < 1)
        throw std::invalid_argument("poly_regression_score: degree must be >= 1");
    const FeatureSplit fs = split_features(train, target);
    if (train.schema[fs.target].kind != ColumnKind::Continuous)
        throw std::invalid_argument(
            "poly_regression_score: target must be continuous");

    std::vector<std::vector<int>> monomials;
    std::vector<int> current(fs.continuous.size(), 0);
    if (!fs.continuous.empty())
        enumerate_monomials(fs.continuous.size(), degree, current, degree, 0,
                            monomials);
    if (monomials.size() > 2000)
        throw std::invalid_argument(
            "poly_regression_score: polynomial expansion too large");

    const Eigen::MatrixXd X = to_eigen(poly_design(train, fs, degree, monomials));
    Eigen::VectorXd y(train.row_count());
    for (size_t i = 0; i < train.row_count(); ++i)
        y(static_cast<long>(i)) = train.rows[i][fs.target].real_value();

    Eigen::VectorXd beta;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() == X.cols()) {
        beta = qr.solve(y);
    } else {
        // ridge fallback for rank-deficient designs
        const Eigen::MatrixXd xtx = X.transpose() * X;
        const double lambda = 1e-8 * (xtx.trace() + 1.0);
        beta = (xtx + lambda * Eigen::MatrixXd::Identity(X.cols(), X.cols()))
                   .ldlt()
                   .solve(X.transpose() * y);
    }
    if (!beta.allFinite())
        throw std::runtime_error("poly_regression_score: solver produced "
                                 "non-finite coefficients");

    const Eigen::MatrixXd Xt = to_eigen(poly_design(test, fs, degree, monomials));
    Eigen::VectorXd yt(test.row_count());
    for (size_t i = 0; i < test.row_count(); ++i)
        yt(static_cast<long>(i)) = test.rows[i][fs.target].real_value();
    const Eigen::VectorXd pred = Xt * beta;

    RegressScore score;
    const double n = static_cast<double>(yt.size());
    score.mse = (pred - yt).squaredNorm() / n;
    score.mae = (pred - yt).cwiseAbs().sum() / n;
    const double sst = (yt.array() - yt.mean()).square().sum();
    score.r2 = sst == 0.0 ? 0.0 : 1.0 - (pred - yt).squaredNorm() / sst;
    return score;
}

namespace {

double score_pair(const Table& train, const Table& test,
                  const std::string& target, bool classification,
                  const EfficacyProtocol& protocol, RegressScore* extra) {
    if (classification)
        return tree_macro_f1(train, test, target, protocol.tree_depth);
    const RegressScore s =
        poly_regression_score(train, test, target, protocol.poly_degree);
    if (extra) *extra = s;
    return s.r2;
}

Table take_rows(const Table& src, const std::vector<size_t>& idx) {
    Table out;
    out.schema = src.schema;
    for (const size_t i : idx) out.rows.push_back(src.rows[i]);
    return out;
}

}  // namespace

EfficacyReport ml_efficacy_cross(const Table& train_table, const Table& holdout,
                                 const std::string& target,
                                 const EfficacyProtocol& protocol) {
    check_same_schema(train_table, holdout, "ml_efficacy_cross");
    const int tc = train_table.column_index(target);
    if (tc < 0) throw std::invalid_argument("unknown target column: " + target);
    EfficacyReport report;
    report.target = target;
    report.classification =
        train_table.schema[tc].kind != ColumnKind::Continuous;
    report.holdout_score = score_pair(train_table, holdout, target,
                                      report.classification, protocol,
                                      &report.regress);

    // k-fold CV inside the training table
    if (protocol.folds >= 2 &&
        train_table.row_count() >= static_cast<size_t>(protocol.folds)) {
        Rng rng(derive_seed(protocol.seed, "efficacy.folds"));
        const auto perm = rng.permutation(train_table.row_count());
        const size_t n = perm.size();
        for (int f = 0; f < protocol.folds; ++f) {
            const size_t lo = n * f / protocol.folds;
            const size_t hi = n * (f + 1) / protocol.folds;
            std::vector<size_t> tr, te;
            for (size_t i = 0; i < n; ++i)
                (i >= lo && i < hi ? te : tr).push_back(perm[i]);
            if (te.empty() || tr.empty()) continue;
            report.fold_scores.push_back(
                score_pair(take_rows(train_table, tr),
                           take_rows(train_table, te), target,
                           report.classification, protocol, nullptr));
        }
        if (!report.fold_scores.empty())
            report.cv_mean = std::accumulate(report.fold_scores.begin(),
                                             report.fold_scores.end(), 0.0) /
                             static_cast<double>(report.fold_scores.size());
    }
    return report;
}

EfficacyReport ml_efficacy(const Table& table, const std::string& target,
                           const EfficacyProtocol& protocol) {
    const auto [train, holdout] = split_train_holdout(
        table, protocol.train_ratio, derive_seed(protocol.seed, "efficacy.split"));
    if (train.rows.empty() || holdout.rows.empty())
        throw std::invalid_argument("ml_efficacy: split produced an empty side");
    return ml_efficacy_cross(train, holdout, target, protocol);
}

}  // namespace rcc
