#ifndef COLA_SCORES_HPP
#define COLA_SCORES_HPP

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cola/errors.hpp"
#include "cola/interval_set.hpp"

namespace cola {

using FeatureVector = std::vector<double>;
using ModelFn = std::function<double(const FeatureVector&)>;

enum class ScoreKind { Residual, RescaledResidual, Cqr, External };

/// Floor applied to scale estimates so rescaled residuals cannot blow up.
inline constexpr double kSigmaMin = 1e-8;

/// A nonconformity score: evaluation S(x, y) plus sublevel-set inversion
/// {y : S(x, y) <= t}. Built-in kinds are backed by model handles; External
/// columns come from ingested matrices and support neither.
struct ScoreSpec {
    ScoreKind kind = ScoreKind::External;
    ModelFn mu;      // point prediction (residual, rescaled)
    ModelFn sigma;   // positive scale (rescaled)
    ModelFn tau_lo;  // lower quantile prediction (cqr)
    ModelFn tau_hi;  // upper quantile prediction (cqr)
    std::string name;

    static ScoreSpec residual(ModelFn mu, std::string name = "residual") {
        ScoreSpec s;
        s.kind = ScoreKind::Residual;
        s.mu = std::move(mu);
        s.name = std::move(name);
        return s;
    }
    static ScoreSpec rescaled(ModelFn mu, ModelFn sigma, std::string name = "rescaled") {
        ScoreSpec s;
        s.kind = ScoreKind::RescaledResidual;
        s.mu = std::move(mu);
        s.sigma = std::move(sigma);
        s.name = std::move(name);
        return s;
    }
    static ScoreSpec cqr(ModelFn tau_lo, ModelFn tau_hi, std::string name = "cqr") {
        ScoreSpec s;
        s.kind = ScoreKind::Cqr;
        s.tau_lo = std::move(tau_lo);
        s.tau_hi = std::move(tau_hi);
        s.name = std::move(name);
        return s;
    }
    static ScoreSpec external(std::string name = "external") {
        ScoreSpec s;
        s.name = std::move(name);
        return s;
    }
};

inline double score_evaluate(const ScoreSpec& spec, const FeatureVector& x, double y) {
    switch (spec.kind) {
        case ScoreKind::Residual:
            return std::fabs(y - spec.mu(x));
        case ScoreKind::RescaledResidual:
            return std::fabs(y - spec.mu(x)) / std::max(spec.sigma(x), kSigmaMin);
        case ScoreKind::Cqr:
            return std::max(spec.tau_lo(x) - y, y - spec.tau_hi(x));
        case ScoreKind::External:
            throw ConfigError("score_evaluate: external scores arrive as matrices only");
    }
    throw ConfigError("score_evaluate: unknown score kind");
}

/// The sublevel set of one score at x as center/slope interval data:
/// {y : S(x, y) <= t} = [lo_base - slope*t, hi_base + slope*t]  (empty if reversed).
struct SublevelGeometry {
    double lo_base;
    double hi_base;
    double slope;  // > 0
};

inline SublevelGeometry sublevel_geometry(const ScoreSpec& spec, const FeatureVector& x) {
    switch (spec.kind) {
        case ScoreKind::Residual: {
            double m = spec.mu(x);
            return {m, m, 1.0};
        }
        case ScoreKind::RescaledResidual: {
            double m = spec.mu(x);
            return {m, m, std::max(spec.sigma(x), kSigmaMin)};
        }
        case ScoreKind::Cqr:
            return {spec.tau_lo(x), spec.tau_hi(x), 1.0};
        case ScoreKind::External:
            throw ConfigError("score_sublevel: external scores cannot build sets for new x");
    }
    throw ConfigError("score_sublevel: unknown score kind");
}

/// {y : S(x, y) <= t}. t = +inf yields the whole real line (no constraint);
/// residual at t = 0 is the singleton [mu, mu]. Residual-type sublevels are
/// never empty for t >= 0; cqr sublevels can be (crossing quantiles, t < 0).
inline PredictionSet score_sublevel(const ScoreSpec& spec, const FeatureVector& x, double t) {
    if (std::isinf(t) && t > 0) return PredictionSet(IntervalUnion::whole_line());
    SublevelGeometry g = sublevel_geometry(spec, x);
    return PredictionSet(IntervalUnion::single(g.lo_base - g.slope * t, g.hi_base + g.slope * t));
}

/// The n x K table of holdout nonconformity scores, stored per column.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    explicit ScoreMatrix(std::vector<std::vector<double>> columns)
        : columns_(std::move(columns)) {
        if (columns_.empty() || columns_.front().empty()) {
            throw std::invalid_argument("ScoreMatrix: need n >= 1 and K >= 1");
        }
        for (const auto& col : columns_) {
            if (col.size() != columns_.front().size()) {
                throw std::invalid_argument("ScoreMatrix: ragged columns");
            }
        }
    }

    std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
    std::size_t cols() const { return columns_.size(); }
    double value(std::size_t i, std::size_t k) const { return columns_[k][i]; }
    const std::vector<double>& column(std::size_t k) const { return columns_[k]; }
    const std::vector<std::vector<double>>& columns() const { return columns_; }

private:
    std::vector<std::vector<double>> columns_;
};

inline ScoreMatrix build_score_matrix(const std::vector<ScoreSpec>& specs,
                                      const std::vector<FeatureVector>& xs,
                                      const std::vector<double>& ys) {
    if (specs.empty()) throw std::invalid_argument("build_score_matrix: no score specs");
    if (xs.empty() || xs.size() != ys.size()) {
        throw std::invalid_argument("build_score_matrix: empty or mismatched data");
    }
    std::vector<std::vector<double>> columns(specs.size(), std::vector<double>(xs.size()));
    for (std::size_t k = 0; k < specs.size(); ++k) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double s = score_evaluate(specs[k], xs[i], ys[i]);
            if (!std::isfinite(s)) {
                throw DataError("build_score_matrix: non-finite score at row " +
                                std::to_string(i) + ", score " + std::to_string(k));
            }
            columns[k][i] = s;
        }
    }
    return ScoreMatrix(std::move(columns));
}

} // namespace cola

#endif // COLA_SCORES_HPP
