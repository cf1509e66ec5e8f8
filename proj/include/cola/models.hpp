#ifndef COLA_MODELS_HPP
#define COLA_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cola/errors.hpp"
#include "cola/scores.hpp"

namespace cola {

enum class ModelKind { Ols, RidgeSubset, Knn, KnnScale, KnnQuantile, TreeStump };

struct ModelHyperparams {
    double lambda = 0.1;              // ridge penalty
    std::vector<int> feature_subset;  // ridge-subset; empty = all features
    int k_neighbors = 10;
    double quantile_lo = 0.05;        // knn-quantile levels
    double quantile_hi = 0.95;
    int max_depth = 3;                // regression tree
    int min_leaf = 5;
};

namespace detail {

// Solve a symmetric positive-definite system in place via Cholesky.
inline std::vector<double> solve_spd(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i][k] * a[j][k];
            if (i == j) {
                if (sum <= 0.0) throw NumericError("solve_spd: matrix not positive definite");
                a[i][i] = std::sqrt(sum);
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= a[i][k] * b[k];
        b[i] /= a[i][i];
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) b[i] -= a[k][i] * b[k];
        b[i] /= a[i][i];
    }
    return b;
}

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    bool is_leaf = true;
};

} // namespace detail

/// A fitted lightweight regressor. Linear kinds store coefficients; k-NN kinds
/// store the training sample; the tree kind stores its node table.
class FittedModel {
public:
    ModelKind kind;
    ModelHyperparams params;
    bool singular_fallback = false;  // ols hit singular normal equations

    // linear kinds
    double intercept = 0.0;
    std::vector<double> coefficients;  // aligned with subset (or all features)
    std::vector<int> subset;           // feature indices the coefficients act on

    // knn kinds
    std::vector<FeatureVector> train_x;
    std::vector<double> train_y;

    // tree kind
    std::vector<detail::TreeNode> nodes;

    double predict_mu(const FeatureVector& x) const {
        switch (kind) {
            case ModelKind::Ols:
            case ModelKind::RidgeSubset: {
                double out = intercept;
                for (std::size_t j = 0; j < subset.size(); ++j) {
                    out += coefficients[j] * x[static_cast<std::size_t>(subset[j])];
                }
                return out;
            }
            case ModelKind::Knn: {
                auto ys = neighbor_values(x);
                return std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
            }
            case ModelKind::TreeStump: {
                int node = 0;
                while (!nodes[node].is_leaf) {
                    node = x[static_cast<std::size_t>(nodes[node].feature)] <= nodes[node].threshold
                               ? nodes[node].left
                               : nodes[node].right;
                }
                return nodes[node].value;
            }
            default:
                throw ConfigError("predict_mu: model kind provides no point prediction");
        }
    }

    double predict_sigma(const FeatureVector& x) const {
        if (kind != ModelKind::KnnScale) {
            throw ConfigError("predict_sigma: model kind provides no scale estimate");
        }
        auto ys = neighbor_values(x);
        double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
        double mad = 0.0;
        for (double v : ys) mad += std::fabs(v - mean);
        return std::max(mad / static_cast<double>(ys.size()), kSigmaMin);
    }

    double predict_tau_lo(const FeatureVector& x) const { return neighbor_quantile(x, params.quantile_lo); }
    double predict_tau_hi(const FeatureVector& x) const { return neighbor_quantile(x, params.quantile_hi); }

private:
    std::vector<double> neighbor_values(const FeatureVector& x) const {
        const std::size_t n = train_x.size();
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(params.k_neighbors), n);
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            double ss = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                double d = train_x[i][j] - x[j];
                ss += d * d;
            }
            dist[i] = {ss, i};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<double> ys(k);
        for (std::size_t i = 0; i < k; ++i) ys[i] = train_y[dist[i].second];
        return ys;
    }

    double neighbor_quantile(const FeatureVector& x, double level) const {
        if (kind != ModelKind::KnnQuantile) {
            throw ConfigError("predict_tau: model kind provides no quantile prediction");
        }
        std::vector<double> ys = neighbor_values(x);
        std::sort(ys.begin(), ys.end());
        long r = static_cast<long>(std::ceil(level * static_cast<double>(ys.size()) - 1e-9));
        r = std::clamp<long>(r, 1, static_cast<long>(ys.size()));
        return ys[r - 1];
    }
};

namespace detail {

inline void fit_linear(FittedModel& model, const std::vector<FeatureVector>& xs,
                       const std::vector<double>& ys, const std::vector<int>& subset,
                       double lambda) {
    const std::size_t n = xs.size();
    const std::size_t p = subset.size();

    // center features and response; ridge penalty then leaves the intercept free
    std::vector<double> x_mean(p, 0.0);
    double y_mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    for (const auto& x : xs) {
        for (std::size_t j = 0; j < p; ++j) x_mean[j] += x[static_cast<std::size_t>(subset[j])];
    }
    for (double& v : x_mean) v /= static_cast<double>(n);

    std::vector<std::vector<double>> gram(p, std::vector<double>(p, 0.0));
    std::vector<double> rhs(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double xc_j = xs[i][static_cast<std::size_t>(subset[j])] - x_mean[j];
            rhs[j] += xc_j * (ys[i] - y_mean);
            for (std::size_t l = 0; l <= j; ++l) {
                gram[j][l] += xc_j * (xs[i][static_cast<std::size_t>(subset[l])] - x_mean[l]);
            }
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t l = j + 1; l < p; ++l) gram[j][l] = gram[l][j];
        gram[j][j] += lambda;
    }

    try {
        model.coefficients = solve_spd(gram, rhs);
    } catch (const NumericError&) {
        for (std::size_t j = 0; j < p; ++j) gram[j][j] += 1e-8;
        model.coefficients = solve_spd(gram, rhs);
        model.singular_fallback = true;
    }
    model.subset = subset;
    model.intercept = y_mean;
    for (std::size_t j = 0; j < p; ++j) model.intercept -= model.coefficients[j] * x_mean[j];
}

inline double node_sse(const std::vector<double>& ys, const std::vector<std::size_t>& idx) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i : idx) {
        sum += ys[i];
        sq += ys[i] * ys[i];
    }
    return sq - sum * sum / static_cast<double>(idx.size());
}

inline int build_tree(FittedModel& model, const std::vector<FeatureVector>& xs,
                      const std::vector<double>& ys, std::vector<std::size_t> idx, int depth) {
    TreeNode node;
    double sum = 0.0;
    for (std::size_t i : idx) sum += ys[i];
    node.value = sum / static_cast<double>(idx.size());

    const int min_leaf = model.params.min_leaf;
    if (depth >= model.params.max_depth ||
        idx.size() < 2 * static_cast<std::size_t>(min_leaf)) {
        model.nodes.push_back(node);
        return static_cast<int>(model.nodes.size() - 1);
    }

    const double parent_sse = node_sse(ys, idx);
    int best_feature = -1;
    double best_threshold = 0.0, best_sse = parent_sse - 1e-12;
    const std::size_t dim = xs.front().size();
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < dim; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return xs[a][f] < xs[b][f] || (xs[a][f] == xs[b][f] && a < b);
        });
        double left_sum = 0.0, left_sq = 0.0;
        double total_sum = 0.0, total_sq = 0.0;
        for (std::size_t i : order) {
            total_sum += ys[i];
            total_sq += ys[i] * ys[i];
        }
        for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
            double y_i = ys[order[pos]];
            left_sum += y_i;
            left_sq += y_i * y_i;
            if (pos + 1 < static_cast<std::size_t>(min_leaf)) continue;
            if (order.size() - pos - 1 < static_cast<std::size_t>(min_leaf)) break;
            double x_here = xs[order[pos]][f];
            double x_next = xs[order[pos + 1]][f];
            if (x_here == x_next) continue;
            double m_left = static_cast<double>(pos + 1);
            double m_right = static_cast<double>(order.size() - pos - 1);
            double right_sum = total_sum - left_sum;
            double sse = (left_sq - left_sum * left_sum / m_left) +
                         ((total_sq - left_sq) - right_sum * right_sum / m_right);
            if (sse < best_sse) {
                best_sse = sse;
                best_feature = static_cast<int>(f);
                best_threshold = 0.5 * (x_here + x_next);
            }
        }
    }

    if (best_feature < 0) {
        model.nodes.push_back(node);
        return static_cast<int>(model.nodes.size() - 1);
    }

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
        (xs[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx)
            .push_back(i);
    }
    node.is_leaf = false;
    node.feature = best_feature;
    node.threshold = best_threshold;
    model.nodes.push_back(node);
    int self = static_cast<int>(model.nodes.size() - 1);
    model.nodes[self].left = build_tree(model, xs, ys, std::move(left_idx), depth + 1);
    model.nodes[self].right = build_tree(model, xs, ys, std::move(right_idx), depth + 1);
    return self;
}

} // namespace detail

inline std::shared_ptr<const FittedModel> fit_model(ModelKind kind, ModelHyperparams params,
                                                    const std::vector<FeatureVector>& xs,
                                                    const std::vector<double>& ys) {
    if (xs.empty() || xs.size() != ys.size()) {
        throw std::invalid_argument("fit_model: empty or mismatched training data");
    }
    auto model = std::make_shared<FittedModel>();
    model->kind = kind;
    model->params = params;
    const int dim = static_cast<int>(xs.front().size());

    switch (kind) {
        case ModelKind::Ols: {
            std::vector<int> all(dim);
            std::iota(all.begin(), all.end(), 0);
            detail::fit_linear(*model, xs, ys, all, 0.0);
            break;
        }
        case ModelKind::RidgeSubset: {
            std::vector<int> subset = params.feature_subset;
            if (subset.empty()) {
                subset.resize(dim);
                std::iota(subset.begin(), subset.end(), 0);
            }
            for (int j : subset) {
                if (j < 0 || j >= dim) throw std::invalid_argument("fit_model: subset index out of range");
            }
            detail::fit_linear(*model, xs, ys, subset, params.lambda);
            break;
        }
        case ModelKind::Knn:
        case ModelKind::KnnScale:
        case ModelKind::KnnQuantile:
            model->train_x = xs;
            model->train_y = ys;
            break;
        case ModelKind::TreeStump: {
            std::vector<std::size_t> idx(xs.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            detail::build_tree(*model, xs, ys, std::move(idx), 0);
            break;
        }
    }
    return model;
}

/// Prediction closures for ScoreSpec construction; absent capabilities stay empty.
struct ModelHandles {
    ModelFn mu;
    ModelFn sigma;
    ModelFn tau_lo;
    ModelFn tau_hi;
};

inline ModelHandles model_handles(std::shared_ptr<const FittedModel> model) {
    ModelHandles h;
    switch (model->kind) {
        case ModelKind::Ols:
        case ModelKind::RidgeSubset:
        case ModelKind::Knn:
        case ModelKind::TreeStump:
            h.mu = [model](const FeatureVector& x) { return model->predict_mu(x); };
            break;
        case ModelKind::KnnScale:
            h.sigma = [model](const FeatureVector& x) { return model->predict_sigma(x); };
            break;
        case ModelKind::KnnQuantile:
            h.tau_lo = [model](const FeatureVector& x) { return model->predict_tau_lo(x); };
            h.tau_hi = [model](const FeatureVector& x) { return model->predict_tau_hi(x); };
            break;
    }
    return h;
}

} // namespace cola

#endif // COLA_MODELS_HPP
