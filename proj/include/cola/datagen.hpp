#ifndef COLA_DATAGEN_HPP
#define COLA_DATAGEN_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cola/errors.hpp"
#include "cola/models.hpp"
#include "cola/rng.hpp"
#include "cola/scores.hpp"

namespace cola {

enum class CaseId { Case1, Case2, Case3, Individual };

inline CaseId parse_case_id(const std::string& name) {
    if (name == "1") return CaseId::Case1;
    if (name == "2") return CaseId::Case2;
    if (name == "3") return CaseId::Case3;
    if (name == "individual") return CaseId::Individual;
    throw ConfigError("unknown case id '" + name + "' (expected 1, 2, 3 or individual)");
}

inline std::string case_name(CaseId id) {
    switch (id) {
        case CaseId::Case1: return "1";
        case CaseId::Case2: return "2";
        case CaseId::Case3: return "3";
        case CaseId::Individual: return "individual";
    }
    return "?";
}

struct Dataset {
    std::vector<FeatureVector> X;
    std::vector<double> y;
    int dim = 0;
    std::string role;
    std::string generator;
    std::uint64_t seed = 0;
};

struct DatasetTriple {
    Dataset train;
    Dataset holdout;
    Dataset test;
};

namespace detail {

// Second parameters of all normal noise terms are variances.
inline constexpr double kCase1NoiseVariance = 0.01;

inline double case12_signal(const FeatureVector& x) {
    return (x[0] + x[1] + x[2] > 0.0) ? 1.0 : 0.0;
}

inline double individual_signal(double x) {
    if (x >= 1.0) return 1.0;
    if (x <= -1.0) return -1.0;
    return x;
}

// Covariance 0.5^{|i-j|} in d = 5; sampled through its Cholesky factor.
inline const std::vector<std::vector<double>>& case12_cholesky() {
    static const std::vector<std::vector<double>> factor = [] {
        std::vector<std::vector<double>> sigma(5, std::vector<double>(5));
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) sigma[i][j] = std::pow(0.5, std::abs(i - j));
        }
        return cholesky_lower(sigma);
    }();
    return factor;
}

inline void draw_rows(CaseId id, int count, Rng& rng, Dataset& out) {
    for (int i = 0; i < count; ++i) {
        FeatureVector x;
        double mean = 0.0, noise = 0.0;
        switch (id) {
            case CaseId::Case1:
            case CaseId::Case2: {
                FeatureVector z(5);
                for (double& v : z) v = rng.normal();
                x.assign(5, 0.0);
                const auto& l = case12_cholesky();
                for (int r = 0; r < 5; ++r) {
                    for (int c = 0; c <= r; ++c) x[r] += l[r][c] * z[c];
                }
                mean = case12_signal(x);
                noise = id == CaseId::Case1 ? std::sqrt(kCase1NoiseVariance) * rng.normal()
                                            : 0.03 * x[0] * rng.normal();
                break;
            }
            case CaseId::Case3: {
                x.assign(100, 0.0);
                for (double& v : x) v = rng.normal();
                mean = 0.0;
                // beta_j = 1{j mod 20 = 0}, 1-indexed: features 20, 40, 60, 80, 100
                for (int j = 19; j < 100; j += 20) mean += x[j];
                noise = rng.normal();
                break;
            }
            case CaseId::Individual: {
                double v = rng.uniform(-2.0, 2.0);
                x.assign(1, v);
                mean = individual_signal(v);
                noise = (0.25 + 0.25 * std::fabs(v)) * rng.normal();
                break;
            }
        }
        out.X.push_back(std::move(x));
        out.y.push_back(mean + noise);
    }
    out.dim = out.X.empty() ? 0 : static_cast<int>(out.X.front().size());
}

} // namespace detail

/// Draw a train/holdout/test triple for one synthetic case. Deterministic in
/// (case, sizes, seed); rows are drawn train first, then holdout, then test.
inline DatasetTriple generate(CaseId id, int n_train, int n_holdout, int n_test,
                              std::uint64_t seed) {
    if (n_train < 1 || n_holdout < 1 || n_test < 1) {
        throw ConfigError("generate: all sizes must be >= 1");
    }
    Rng rng(seed);
    DatasetTriple triple;
    triple.train.role = "train";
    triple.holdout.role = "holdout";
    triple.test.role = "test";
    for (Dataset* ds : {&triple.train, &triple.holdout, &triple.test}) {
        ds->generator = case_name(id);
        ds->seed = seed;
    }
    detail::draw_rows(id, n_train, rng, triple.train);
    detail::draw_rows(id, n_holdout, rng, triple.holdout);
    detail::draw_rows(id, n_test, rng, triple.test);
    return triple;
}

/// The per-case score menus, built from models fitted on the training split.
/// Case 3 accepts the submodel count (default 4); the other cases have fixed
/// menus. `seed` drives the Case 3 feature-subset draws.
inline std::vector<ScoreSpec> make_case_score_specs(CaseId id, const Dataset& train,
                                                    double alpha, std::uint64_t seed,
                                                    int case3_submodels = 4) {
    std::vector<ScoreSpec> specs;
    switch (id) {
        case CaseId::Case1: {
            ModelHyperparams ridge_params;
            ridge_params.lambda = 0.1;
            auto ols = fit_model(ModelKind::Ols, {}, train.X, train.y);
            auto ridge = fit_model(ModelKind::RidgeSubset, ridge_params, train.X, train.y);
            auto knn = fit_model(ModelKind::Knn, {}, train.X, train.y);
            auto tree = fit_model(ModelKind::TreeStump, {}, train.X, train.y);
            specs.push_back(ScoreSpec::residual(model_handles(ols).mu, "residual-ols"));
            specs.push_back(ScoreSpec::residual(model_handles(ridge).mu, "residual-ridge"));
            specs.push_back(ScoreSpec::residual(model_handles(knn).mu, "residual-knn"));
            specs.push_back(ScoreSpec::residual(model_handles(tree).mu, "residual-tree"));
            break;
        }
        case CaseId::Case2: {
            auto tree = fit_model(ModelKind::TreeStump, {}, train.X, train.y);
            auto knn = fit_model(ModelKind::Knn, {}, train.X, train.y);
            auto knn_scale = fit_model(ModelKind::KnnScale, {}, train.X, train.y);
            ModelHyperparams q_params;
            q_params.quantile_lo = alpha / 2.0;
            q_params.quantile_hi = 1.0 - alpha / 2.0;
            auto knn_q = fit_model(ModelKind::KnnQuantile, q_params, train.X, train.y);
            specs.push_back(ScoreSpec::residual(model_handles(tree).mu, "residual-tree"));
            specs.push_back(ScoreSpec::rescaled(model_handles(knn).mu,
                                                model_handles(knn_scale).sigma, "rescaled-knn"));
            auto qh = model_handles(knn_q);
            specs.push_back(ScoreSpec::cqr(qh.tau_lo, qh.tau_hi, "cqr-knn"));
            break;
        }
        case CaseId::Case3: {
            if (case3_submodels < 1) throw ConfigError("case 3 needs at least one submodel");
            Rng subset_rng(seed ^ 0x5ca1ab1eULL);
            std::vector<int> all_features(train.dim);
            std::iota(all_features.begin(), all_features.end(), 0);
            for (int k = 0; k < case3_submodels; ++k) {
                std::vector<int> pool = all_features;
                subset_rng.shuffle(pool);
                ModelHyperparams ridge_params;
                ridge_params.lambda = 0.1;
                const std::size_t subset_size = std::min<std::size_t>(20, pool.size());
                ridge_params.feature_subset.assign(pool.begin(), pool.begin() + subset_size);
                auto ridge = fit_model(ModelKind::RidgeSubset, ridge_params, train.X, train.y);
                specs.push_back(ScoreSpec::residual(model_handles(ridge).mu,
                                                    "residual-ridge" + std::to_string(k)));
            }
            break;
        }
        case CaseId::Individual: {
            auto ols = fit_model(ModelKind::Ols, {}, train.X, train.y);
            auto tree = fit_model(ModelKind::TreeStump, {}, train.X, train.y);
            specs.push_back(ScoreSpec::residual(model_handles(ols).mu, "residual-ols"));
            specs.push_back(ScoreSpec::residual(model_handles(tree).mu, "residual-tree"));
            break;
        }
    }
    return specs;
}

} // namespace cola

#endif // COLA_DATAGEN_HPP
