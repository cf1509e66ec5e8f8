#ifndef COLA_METHODS_HPP
#define COLA_METHODS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cola/allocation.hpp"
#include "cola/errors.hpp"
#include "cola/interval_set.hpp"
#include "cola/localized.hpp"
#include "cola/quantiles.hpp"
#include "cola/rng.hpp"
#include "cola/scores.hpp"

namespace cola {

struct OptimizerOptions {
    int k_max = 4;
    int max_iterations = 10;  // stepwise iteration cap T
};

/// A calibrated aggregated predictor: predict(x) intersects the per-score
/// sublevel sets at the fitted thresholds. For quantile-based methods
/// t_k = +inf exactly when the allocation gives score k zero units.
struct ConformalPredictor {
    std::vector<ScoreSpec> specs;
    std::vector<double> thresholds;
    Allocation allocation;
    std::string method;
    double alpha = 0.1;
    double fit_loss = kInf;  // empirical loss achieved by the fitted allocation

    PredictionSet predict(const FeatureVector& x) const {
        PredictionSet out(IntervalUnion::whole_line());
        for (std::size_t k = 0; k < specs.size(); ++k) {
            out = intersect(out, score_sublevel(specs[k], x, thresholds[k]));
        }
        return out;
    }
};

/// Uniformly spaced hypothesized labels for label-search methods (COLA-f, SAT).
struct YGrid {
    double lo = 0.0;
    double hi = 1.0;
    int count = 200;

    double point(int j) const {
        return lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
    }

    /// Default grid: the holdout label range widened by one range on each side.
    static YGrid from_labels(const std::vector<double>& ys, int count = 200) {
        if (count < 2) throw ConfigError("YGrid: count must be >= 2");
        auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
        double range = *mx - *mn;
        if (range <= 0.0) range = std::max(1.0, std::fabs(*mx));
        return {*mn - range, *mx + range, count};
    }
};

namespace detail {

inline void check_holdout(const std::vector<FeatureVector>& xs, const std::vector<double>& ys) {
    if (xs.empty() || xs.size() != ys.size()) {
        throw std::invalid_argument("holdout features/labels empty or mismatched");
    }
}

inline std::vector<double> thresholds_from_oracle(const LossOracle& oracle,
                                                  const std::vector<int>& units) {
    std::vector<double> t(units.size());
    for (std::size_t k = 0; k < units.size(); ++k) {
        t[k] = oracle.threshold(static_cast<int>(k), units[k]);
    }
    return t;
}

/// Included grid points become midpoint-centered cells of width
/// (hi-lo)/(count-1); the first and last grid points contribute half-cells.
inline PredictionSet grid_cells_to_set(const YGrid& grid, const std::vector<bool>& included) {
    if (grid.count < 2 || !(grid.lo < grid.hi)) {
        throw ConfigError("YGrid: need count >= 2 and lo < hi");
    }
    const double delta = (grid.hi - grid.lo) / static_cast<double>(grid.count - 1);
    std::vector<Interval> cells;
    for (int j = 0; j < grid.count; ++j) {
        if (!included[static_cast<std::size_t>(j)]) continue;
        double center = grid.point(j);
        double lo = j == 0 ? grid.lo : center - 0.5 * delta;
        double hi = j == grid.count - 1 ? grid.hi : center + 0.5 * delta;
        cells.push_back({lo, hi});
    }
    return PredictionSet(IntervalUnion::normalized(std::move(cells)));
}

inline AllocationResult optimize_on_grid(const LossOracle& oracle,
                                         const OptimizerOptions& options) {
    return stepwise_optimize(oracle, oracle.budget(), options.k_max, options.max_iterations);
}

inline std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t split_seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(split_seed);
    rng.shuffle(perm);
    return perm;
}

struct HoldoutSplit {
    std::vector<FeatureVector> x_tune, x_cal;
    std::vector<double> y_tune, y_cal;
};

// equal split (n_tune = floor(n/2)) by seeded permutation
inline HoldoutSplit split_holdout(const std::vector<FeatureVector>& xs,
                                  const std::vector<double>& ys, std::uint64_t split_seed) {
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("split_holdout: holdout size must be >= 2");
    std::vector<std::size_t> perm = split_permutation(n, split_seed);
    const std::size_t n_tune = n / 2;
    HoldoutSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_tune) {
            split.x_tune.push_back(xs[perm[i]]);
            split.y_tune.push_back(ys[perm[i]]);
        } else {
            split.x_cal.push_back(xs[perm[i]]);
            split.y_cal.push_back(ys[perm[i]]);
        }
    }
    return split;
}

} // namespace detail

/// COLA-e: allocation and calibration on the full holdout.
inline ConformalPredictor fit_cola_e(const std::vector<ScoreSpec>& specs,
                                     const std::vector<FeatureVector>& x_holdout,
                                     const std::vector<double>& y_holdout, double alpha,
                                     const OptimizerOptions& options = {}) {
    detail::check_holdout(x_holdout, y_holdout);
    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);
    LossOracle oracle = make_marginal_oracle(specs, matrix, x_holdout, alpha);
    AllocationResult res = detail::optimize_on_grid(oracle, options);

    ConformalPredictor p;
    p.specs = specs;
    p.thresholds = detail::thresholds_from_oracle(oracle, res.allocation.units);
    p.allocation = res.allocation;
    p.method = "cola-e";
    p.alpha = alpha;
    p.fit_loss = res.loss;
    return p;
}

/// COLA-s: allocation on a tuning half, thresholds recalibrated on the
/// disjoint calibration half (finite-sample valid).
inline ConformalPredictor fit_cola_s(const std::vector<ScoreSpec>& specs,
                                     const std::vector<FeatureVector>& x_holdout,
                                     const std::vector<double>& y_holdout, double alpha,
                                     std::uint64_t split_seed,
                                     const OptimizerOptions& options = {}) {
    detail::check_holdout(x_holdout, y_holdout);
    detail::HoldoutSplit split = detail::split_holdout(x_holdout, y_holdout, split_seed);

    ScoreMatrix tune_matrix = build_score_matrix(specs, split.x_tune, split.y_tune);
    LossOracle oracle = make_marginal_oracle(specs, tune_matrix, split.x_tune, alpha);
    AllocationResult res = detail::optimize_on_grid(oracle, options);

    ScoreMatrix cal_matrix = build_score_matrix(specs, split.x_cal, split.y_cal);
    ConformalPredictor p;
    p.specs = specs;
    p.thresholds.resize(specs.size());
    for (std::size_t k = 0; k < specs.size(); ++k) {
        int u = res.allocation.units[k];
        p.thresholds[k] = u == 0 ? kInf
                                 : augmented_quantile(cal_matrix.column(k),
                                                      res.allocation.alpha_at(k));
    }
    p.allocation = res.allocation;
    p.method = "cola-s";
    p.alpha = alpha;
    p.fit_loss = res.loss;
    return p;
}

namespace detail {

inline ConformalPredictor fit_singleton(const std::vector<ScoreSpec>& specs,
                                        const LossOracle& oracle, std::string method,
                                        double alpha) {
    const int num_scores = oracle.num_scores();
    const int budget = oracle.budget();
    int best_k = 0;
    double best_loss = kInf;
    for (int k = 0; k < num_scores; ++k) {
        std::vector<int> units(num_scores, 0);
        units[k] = budget;
        double l = oracle.loss(units);
        if (l < best_loss) {
            best_loss = l;
            best_k = k;
        }
    }
    ConformalPredictor p;
    p.specs = specs;
    p.allocation.units.assign(num_scores, 0);
    p.allocation.units[best_k] = budget;
    p.allocation.grid_n = oracle.grid_n();
    p.thresholds = thresholds_from_oracle(oracle, p.allocation.units);
    p.method = std::move(method);
    p.alpha = alpha;
    p.fit_loss = best_loss;
    return p;
}

} // namespace detail

/// EFCP: single-score selection (allocation restricted to one-hot budget
/// vectors) on the full holdout.
inline ConformalPredictor fit_efcp(const std::vector<ScoreSpec>& specs,
                                   const std::vector<FeatureVector>& x_holdout,
                                   const std::vector<double>& y_holdout, double alpha) {
    detail::check_holdout(x_holdout, y_holdout);
    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);
    LossOracle oracle = make_marginal_oracle(specs, matrix, x_holdout, alpha);
    return detail::fit_singleton(specs, oracle, "efcp", alpha);
}

/// VFCP: EFCP with the same split protocol as COLA-s; selection on the tuning
/// half, threshold from the calibration half.
inline ConformalPredictor fit_vfcp(const std::vector<ScoreSpec>& specs,
                                   const std::vector<FeatureVector>& x_holdout,
                                   const std::vector<double>& y_holdout, double alpha,
                                   std::uint64_t split_seed) {
    detail::check_holdout(x_holdout, y_holdout);
    detail::HoldoutSplit split = detail::split_holdout(x_holdout, y_holdout, split_seed);

    ScoreMatrix tune_matrix = build_score_matrix(specs, split.x_tune, split.y_tune);
    LossOracle oracle = make_marginal_oracle(specs, tune_matrix, split.x_tune, alpha);
    ConformalPredictor p = detail::fit_singleton(specs, oracle, "vfcp", alpha);

    ScoreMatrix cal_matrix = build_score_matrix(specs, split.x_cal, split.y_cal);
    for (std::size_t k = 0; k < specs.size(); ++k) {
        int u = p.allocation.units[k];
        p.thresholds[k] =
            u == 0 ? kInf : augmented_quantile(cal_matrix.column(k), p.allocation.alpha_at(k));
    }
    return p;
}

/// Random baseline: one score chosen uniformly at random, full budget on it.
inline ConformalPredictor fit_random_select(const std::vector<ScoreSpec>& specs,
                                            const std::vector<FeatureVector>& x_holdout,
                                            const std::vector<double>& y_holdout, double alpha,
                                            std::uint64_t seed) {
    detail::check_holdout(x_holdout, y_holdout);
    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);
    LossOracle oracle = make_marginal_oracle(specs, matrix, x_holdout, alpha);

    Rng rng(seed);
    const int chosen = static_cast<int>(rng.uniform_index(specs.size()));
    ConformalPredictor p;
    p.specs = specs;
    p.allocation.units.assign(specs.size(), 0);
    p.allocation.units[chosen] = oracle.budget();
    p.allocation.grid_n = oracle.grid_n();
    p.thresholds = detail::thresholds_from_oracle(oracle, p.allocation.units);
    p.method = "random";
    p.alpha = alpha;
    p.fit_loss = oracle.loss(p.allocation.units);
    return p;
}

/// COLA-f: full-conformal prediction at x_new. For every hypothesized grid
/// label y the holdout scores are augmented with S_k(x_new, y), the allocation
/// is refit over all n+1 evaluation points with quantiles of the n+1 augmented
/// values (rank ceil((1-alpha_k)(n+1)), no +inf element), and y is kept iff it
/// lies in the resulting intersection at x_new. Returns the union of the kept
/// grid cells; a grid too coarse to resolve the set boundary is not detectable,
/// so the cell width is the caller's resolution knob.
inline PredictionSet predict_cola_f(const std::vector<ScoreSpec>& specs,
                                    const std::vector<FeatureVector>& x_holdout,
                                    const std::vector<double>& y_holdout, double alpha,
                                    const FeatureVector& x_new, const YGrid& grid,
                                    const OptimizerOptions& options = {}) {
    detail::check_holdout(x_holdout, y_holdout);
    const std::size_t n = x_holdout.size();
    const std::size_t num_scores = specs.size();
    const int grid_n = static_cast<int>(n) + 1;
    const int budget = budget_units(alpha, grid_n);

    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);
    std::vector<std::vector<double>> sorted_cols(num_scores);
    for (std::size_t k = 0; k < num_scores; ++k) {
        sorted_cols[k] = matrix.column(k);
        std::sort(sorted_cols[k].begin(), sorted_cols[k].end());
    }

    // geometry over holdout points plus x_new (index n); shared across grid labels
    std::vector<std::vector<SublevelGeometry>> geometry(num_scores);
    for (std::size_t k = 0; k < num_scores; ++k) {
        geometry[k].reserve(n + 1);
        for (const FeatureVector& x : x_holdout) {
            geometry[k].push_back(sublevel_geometry(specs[k], x));
        }
        geometry[k].push_back(sublevel_geometry(specs[k], x_new));
    }

    std::vector<bool> included(static_cast<std::size_t>(grid.count), false);
    for (int j = 0; j < grid.count; ++j) {
        const double y = grid.point(j);

        std::vector<std::vector<double>> thresholds(num_scores,
                                                    std::vector<double>(budget + 1));
        std::vector<double> new_scores(num_scores);
        for (std::size_t k = 0; k < num_scores; ++k) {
            // S_k(x_new, y) recovered from the interval geometry at x_new
            const SublevelGeometry& g = geometry[k][n];
            const double s_new =
                std::max((g.lo_base - y) / g.slope, (y - g.hi_base) / g.slope);
            new_scores[k] = s_new;
            const auto& col = sorted_cols[k];
            const std::size_t pos = static_cast<std::size_t>(
                std::upper_bound(col.begin(), col.end(), s_new) - col.begin());
            // rank of the (1 - u/(n+1)) quantile among the n+1 values: n+1-u
            for (int u = 0; u <= budget; ++u) {
                const std::size_t idx = n - static_cast<std::size_t>(u);  // 0-based rank
                double value;
                if (idx < pos) {
                    value = col[idx];
                } else if (idx == pos) {
                    value = s_new;
                } else {
                    value = col[idx - 1];
                }
                thresholds[k][u] = value;
            }
        }

        LossOracle oracle(std::move(thresholds), geometry, grid_n);
        AllocationResult res = detail::optimize_on_grid(oracle, options);

        bool inside = true;
        for (std::size_t k = 0; k < num_scores && inside; ++k) {
            inside = new_scores[k] <=
                     oracle.threshold(static_cast<int>(k), res.allocation.units[k]);
        }
        included[static_cast<std::size_t>(j)] = inside;
    }
    return detail::grid_cells_to_set(grid, included);
}

/// COLA-l: individualized allocation at x_new with kernel-weighted quantiles.
/// The allocation minimizes the size of the intersection at x_new alone over
/// the budget grid; zero-unit scores impose no constraint.
inline PredictionSet predict_cola_l(const std::vector<ScoreSpec>& specs,
                                    const std::vector<FeatureVector>& x_holdout,
                                    const std::vector<double>& y_holdout, double alpha,
                                    const FeatureVector& x_new, const KernelSpec& kernel,
                                    const OptimizerOptions& options = {}) {
    detail::check_holdout(x_holdout, y_holdout);
    const std::size_t n = x_holdout.size();
    const std::size_t num_scores = specs.size();
    const int budget = budget_units(alpha, static_cast<int>(n));

    WeightVector weights = kernel_weights(x_holdout, x_new, kernel);
    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);

    std::vector<std::vector<double>> thresholds(num_scores, std::vector<double>(budget + 1));
    for (std::size_t k = 0; k < num_scores; ++k) {
        // weighted empirical CDF over the sorted column; ties pooled per value
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto& col = matrix.column(k);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return col[a] < col[b] || (col[a] == col[b] && a < b);
        });
        std::vector<double> values;
        std::vector<double> cum;
        double running = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            running += weights.w[order[j]];
            if (j + 1 < n && col[order[j + 1]] == col[order[j]]) continue;
            values.push_back(col[order[j]]);
            cum.push_back(running);
        }
        thresholds[k][0] = kInf;
        for (int u = 1; u <= budget; ++u) {
            const double target = 1.0 - static_cast<double>(u) / static_cast<double>(n);
            auto it = std::lower_bound(cum.begin(), cum.end(), target);
            thresholds[k][u] = it == cum.end() ? values.back()
                                               : values[static_cast<std::size_t>(it - cum.begin())];
        }
    }

    std::vector<std::vector<SublevelGeometry>> geometry(num_scores);
    for (std::size_t k = 0; k < num_scores; ++k) {
        geometry[k].push_back(sublevel_geometry(specs[k], x_new));
    }

    LossOracle oracle(std::move(thresholds), std::move(geometry), static_cast<int>(n));
    AllocationResult res = detail::optimize_on_grid(oracle, options);

    PredictionSet out(IntervalUnion::whole_line());
    for (std::size_t k = 0; k < num_scores; ++k) {
        out = intersect(out, score_sublevel(specs[k], x_new,
                                            oracle.threshold(static_cast<int>(k),
                                                             res.allocation.units[k])));
    }
    return out;
}

/// Exact sweep over the interval endpoints: the set of points covered by more
/// than half of the given closed-interval unions.
inline PredictionSet majority_vote_of_sets(const std::vector<IntervalUnion>& sets) {
    const std::size_t num_scores = sets.size();
    if (num_scores == 0) throw std::invalid_argument("majority_vote_of_sets: no sets");

    std::vector<double> endpoints;
    for (const IntervalUnion& s : sets) {
        for (const Interval& iv : s.intervals()) {
            if (std::isfinite(iv.lo)) endpoints.push_back(iv.lo);
            if (std::isfinite(iv.hi)) endpoints.push_back(iv.hi);
        }
    }
    std::sort(endpoints.begin(), endpoints.end());
    endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());

    auto count_at = [&](double y) {
        std::size_t c = 0;
        for (const IntervalUnion& s : sets) c += s.contains(y) ? 1 : 0;
        return c;
    };
    const double needed = static_cast<double>(num_scores) / 2.0;  // strict majority

    std::vector<Interval> pieces;
    if (endpoints.empty()) {
        // every set is the whole line or empty
        if (static_cast<double>(count_at(0.0)) > needed) pieces.push_back({-kInf, kInf});
        return PredictionSet(IntervalUnion::normalized(std::move(pieces)));
    }
    if (static_cast<double>(count_at(endpoints.front() - 1.0)) > needed) {
        pieces.push_back({-kInf, endpoints.front()});
    }
    for (std::size_t j = 0; j < endpoints.size(); ++j) {
        if (static_cast<double>(count_at(endpoints[j])) > needed) {
            pieces.push_back({endpoints[j], endpoints[j]});
        }
        if (j + 1 < endpoints.size()) {
            double mid = 0.5 * (endpoints[j] + endpoints[j + 1]);
            if (static_cast<double>(count_at(mid)) > needed) {
                pieces.push_back({endpoints[j], endpoints[j + 1]});
            }
        }
    }
    if (static_cast<double>(count_at(endpoints.back() + 1.0)) > needed) {
        pieces.push_back({endpoints.back(), kInf});
    }
    return PredictionSet(IntervalUnion::normalized(std::move(pieces)));
}

/// Majority vote: K sets at level 1 - alpha/2 each; keep the labels covered by
/// more than half of them.
inline PredictionSet predict_majority_vote(const std::vector<ScoreSpec>& specs,
                                           const std::vector<FeatureVector>& x_holdout,
                                           const std::vector<double>& y_holdout, double alpha,
                                           const FeatureVector& x_new) {
    detail::check_holdout(x_holdout, y_holdout);
    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);

    std::vector<IntervalUnion> sets;
    sets.reserve(specs.size());
    for (std::size_t k = 0; k < specs.size(); ++k) {
        double t = augmented_quantile(matrix.column(k), alpha / 2.0);
        sets.push_back(score_sublevel(specs[k], x_new, t).intervals());
    }
    return majority_vote_of_sets(sets);
}

/// Cauchy combination of p-values: 0.5 - atan(mean tan(pi(0.5 - p_k))) / pi.
/// Inputs are clamped to [lower_clamp, 1 - 1e-12] to keep the tangent finite;
/// the identity map for a single p-value.
inline double cauchy_combined_p(const std::vector<double>& p_values, double lower_clamp) {
    if (p_values.empty()) throw std::invalid_argument("cauchy_combined_p: no p-values");
    const double pi = 3.14159265358979323846;
    double stat = 0.0;
    for (double p : p_values) {
        stat += std::tan(pi * (0.5 - std::clamp(p, lower_clamp, 1.0 - 1e-12)));
    }
    stat /= static_cast<double>(p_values.size());
    return 0.5 - std::atan(stat) / pi;
}

/// SAT: keep grid labels whose Cauchy-combined conformal p-value across the K
/// scores exceeds alpha.
inline PredictionSet predict_sat(const std::vector<ScoreSpec>& specs,
                                 const std::vector<FeatureVector>& x_holdout,
                                 const std::vector<double>& y_holdout, double alpha,
                                 const FeatureVector& x_new, const YGrid& grid) {
    detail::check_holdout(x_holdout, y_holdout);
    ScoreMatrix matrix = build_score_matrix(specs, x_holdout, y_holdout);
    const std::size_t n = x_holdout.size();
    const std::size_t num_scores = specs.size();

    std::vector<double> p_values(num_scores);
    std::vector<bool> included(static_cast<std::size_t>(grid.count), false);
    for (int j = 0; j < grid.count; ++j) {
        const double y = grid.point(j);
        for (std::size_t k = 0; k < num_scores; ++k) {
            p_values[k] = conformal_p_value(matrix.column(k), score_evaluate(specs[k], x_new, y));
        }
        double combined = cauchy_combined_p(p_values, 1.0 / static_cast<double>(n + 1));
        included[static_cast<std::size_t>(j)] = combined > alpha;
    }
    return detail::grid_cells_to_set(grid, included);
}

} // namespace cola

#endif // COLA_METHODS_HPP
