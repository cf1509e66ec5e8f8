#ifndef COLA_ALLOCATION_HPP
#define COLA_ALLOCATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "cola/errors.hpp"
#include "cola/interval_set.hpp"
#include "cola/quantiles.hpp"
#include "cola/scores.hpp"

namespace cola {

/// Integer confidence-budget units on the grid G(n): alpha_k = units[k] / grid_n.
struct Allocation {
    std::vector<int> units;
    int grid_n = 1;

    int budget() const { return std::accumulate(units.begin(), units.end(), 0); }
    double alpha_at(std::size_t k) const {
        return static_cast<double>(units[k]) / static_cast<double>(grid_n);
    }
    std::vector<int> support() const {
        std::vector<int> s;
        for (std::size_t k = 0; k < units.size(); ++k) {
            if (units[k] > 0) s.push_back(static_cast<int>(k));
        }
        return s;
    }
};

/// Total budget units for miscoverage alpha on grid G(n); the epsilon keeps
/// exact products like 0.1*300 from flooring one unit low, and the floor keeps
/// the effective miscoverage B/n <= alpha.
inline int budget_units(double alpha, int grid_n) {
    return static_cast<int>(std::floor(alpha * static_cast<double>(grid_n) + 1e-9));
}

struct TraceEntry {
    int iteration;
    int selected_index;  // forward-step pick; -1 when not applicable
    double loss;
};

struct AllocationResult {
    Allocation allocation;
    double loss = kInf;
    std::vector<int> support;
    std::vector<TraceEntry> trace;
};

/// Precomputed machinery for evaluating the empirical loss
///   L_n(alpha) = mean_i | intersect_k {y : S_k(X_i, y) <= t_k(alpha_k)} |
/// on the budget grid: per-score threshold tables for every level u in 0..B and
/// per-evaluation-point sublevel geometry. Immutable after construction.
///
/// Marginal and localized calibration set thresholds[k][0] = +inf (a zero
/// budget is no constraint). Full-conformal calibration passes finite
/// thresholds at u = 0 (the max of the augmented sample constrains even at
/// zero budget), in which case every score constrains at every point and
/// out-of-support scores sit at their level-0 threshold.
class LossOracle {
public:
    LossOracle(std::vector<std::vector<double>> thresholds,
               std::vector<std::vector<SublevelGeometry>> geometry, int grid_n,
               std::vector<std::vector<double>> sorted_columns = {})
        : thresholds_(std::move(thresholds)),
          geometry_(std::move(geometry)),
          sorted_columns_(std::move(sorted_columns)),
          grid_n_(grid_n) {
        if (thresholds_.empty() || geometry_.size() != thresholds_.size()) {
            throw std::invalid_argument("LossOracle: thresholds/geometry shape mismatch");
        }
        num_points_ = geometry_.front().size();
        budget_ = static_cast<int>(thresholds_.front().size()) - 1;
        for (const auto& g : geometry_) {
            if (g.size() != num_points_) throw std::invalid_argument("LossOracle: ragged geometry");
        }
        build_base_envelope();
    }

    int num_scores() const { return static_cast<int>(thresholds_.size()); }
    int budget() const { return budget_; }
    int grid_n() const { return grid_n_; }
    std::size_t num_eval_points() const { return num_points_; }
    double threshold(int k, int u) const { return thresholds_[k][u]; }
    bool has_columns() const { return !sorted_columns_.empty(); }
    const std::vector<double>& sorted_column(int k) const { return sorted_columns_[k]; }
    const SublevelGeometry& geometry(int k, std::size_t i) const { return geometry_[k][i]; }

    /// Empirical loss of a full K-length unit vector.
    double loss(const std::vector<int>& units) const {
        if (units.size() != thresholds_.size()) {
            throw std::invalid_argument("LossOracle::loss: unit vector length mismatch");
        }
        std::vector<int> support;
        std::vector<int> su;
        for (std::size_t k = 0; k < units.size(); ++k) {
            if (units[k] > 0) {
                support.push_back(static_cast<int>(k));
                su.push_back(units[k]);
            }
        }
        return loss_on_support(support, su);
    }

    /// Empirical loss with units su on the given support; all other scores sit
    /// at level 0 (no constraint, or the level-0 threshold when finite).
    double loss_on_support(std::span<const int> support, std::span<const int> su) const {
        double scratch[kMaxSupport];
        const std::size_t s = support.size();
        if (s > kMaxSupport) throw std::invalid_argument("loss_on_support: support too large");
        for (std::size_t j = 0; j < s; ++j) scratch[j] = thresholds_[support[j]][su[j]];

        double total = 0.0;
        for (std::size_t i = 0; i < num_points_; ++i) {
            double lo = base_lo_[i];
            double hi = base_hi_[i];
            for (std::size_t j = 0; j < s; ++j) {
                const SublevelGeometry& g = geometry_[support[j]][i];
                const double t = scratch[j];
                lo = std::max(lo, g.lo_base - g.slope * t);
                hi = std::min(hi, g.hi_base + g.slope * t);
                if (lo > hi) break;
            }
            if (hi > lo) total += hi - lo;
        }
        return total / static_cast<double>(num_points_);
    }

    static constexpr std::size_t kMaxSupport = 256;

private:
    void build_base_envelope() {
        base_lo_.assign(num_points_, -kInf);
        base_hi_.assign(num_points_, kInf);
        for (std::size_t k = 0; k < thresholds_.size(); ++k) {
            const double t0 = thresholds_[k][0];
            if (std::isinf(t0)) continue;
            for (std::size_t i = 0; i < num_points_; ++i) {
                const SublevelGeometry& g = geometry_[k][i];
                base_lo_[i] = std::max(base_lo_[i], g.lo_base - g.slope * t0);
                base_hi_[i] = std::min(base_hi_[i], g.hi_base + g.slope * t0);
            }
        }
    }

    std::vector<std::vector<double>> thresholds_;
    std::vector<std::vector<SublevelGeometry>> geometry_;
    std::vector<std::vector<double>> sorted_columns_;
    std::vector<double> base_lo_;
    std::vector<double> base_hi_;
    std::size_t num_points_ = 0;
    int grid_n_ = 1;
    int budget_ = 0;
};

/// Marginal-calibration oracle: augmented empirical quantiles of the holdout
/// score columns at every grid level, evaluated at the given points.
inline LossOracle make_marginal_oracle(const std::vector<ScoreSpec>& specs,
                                       const ScoreMatrix& matrix,
                                       const std::vector<FeatureVector>& eval_xs,
                                       double alpha) {
    const int n = static_cast<int>(matrix.rows());
    const int budget = budget_units(alpha, n);
    const std::size_t num_scores = matrix.cols();
    if (specs.size() != num_scores) {
        throw std::invalid_argument("make_marginal_oracle: specs/matrix mismatch");
    }

    std::vector<std::vector<double>> sorted_cols(num_scores);
    std::vector<std::vector<double>> thresholds(num_scores, std::vector<double>(budget + 1));
    for (std::size_t k = 0; k < num_scores; ++k) {
        sorted_cols[k] = matrix.column(k);
        std::sort(sorted_cols[k].begin(), sorted_cols[k].end());
        thresholds[k][0] = kInf;
        // rank of the augmented (1 - u/n) quantile: r = n - u + 1 for 1 <= u < n
        for (int u = 1; u <= budget; ++u) thresholds[k][u] = sorted_cols[k][n - u];
    }

    std::vector<std::vector<SublevelGeometry>> geometry(num_scores);
    for (std::size_t k = 0; k < num_scores; ++k) {
        geometry[k].reserve(eval_xs.size());
        for (const FeatureVector& x : eval_xs) {
            geometry[k].push_back(sublevel_geometry(specs[k], x));
        }
    }
    return LossOracle(std::move(thresholds), std::move(geometry), n, std::move(sorted_cols));
}

/// Visit every nonnegative integer vector of length `parts` summing to
/// `budget`, in lexicographic order. Exactly C(budget+parts-1, parts-1) items.
template <typename Fn>
void for_each_composition(int parts, int budget, Fn&& fn) {
    if (parts < 1) throw std::invalid_argument("for_each_composition: parts must be >= 1");
    std::vector<int> units(parts, 0);
    auto recurse = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == parts - 1) {
            units[pos] = remaining;
            fn(std::span<const int>(units));
            return;
        }
        for (int u = 0; u <= remaining; ++u) {
            units[pos] = u;
            self(self, pos + 1, remaining - u);
        }
    };
    recurse(recurse, 0, budget);
}

inline std::vector<std::vector<int>> enumerate_compositions(int parts, int budget) {
    std::vector<std::vector<int>> out;
    for_each_composition(parts, budget, [&](std::span<const int> u) {
        out.emplace_back(u.begin(), u.end());
    });
    return out;
}

/// Globally minimal empirical loss over all compositions of the budget on the
/// candidate index set. Ties prefer budget on lower-indexed scores (the
/// lexicographically largest unit vector), which the ascending enumeration
/// realizes by keeping the last minimum.
inline AllocationResult exhaustive_search(const LossOracle& oracle,
                                          std::vector<int> candidates, int budget) {
    if (candidates.empty()) throw std::invalid_argument("exhaustive_search: empty candidate set");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const int parts = static_cast<int>(candidates.size());
    double best_loss = kInf;
    std::vector<int> best_units(parts, 0);
    bool first = true;
    for_each_composition(parts, budget, [&](std::span<const int> su) {
        double l = oracle.loss_on_support(candidates, su);
        if (first || l <= best_loss) {
            best_loss = l;
            best_units.assign(su.begin(), su.end());
            first = false;
        }
    });

    AllocationResult result;
    result.allocation.units.assign(oracle.num_scores(), 0);
    result.allocation.grid_n = oracle.grid_n();
    for (int j = 0; j < parts; ++j) result.allocation.units[candidates[j]] = best_units[j];
    result.loss = best_loss;
    result.support = result.allocation.support();
    return result;
}

/// Forward/backward stepwise search for the empirical risk minimizer. With
/// K <= k_max this is plain exhaustive grid search; otherwise each iteration
/// adds the score whose support-constrained optimum improves the loss most
/// (stopping when no strict improvement remains), then drops zero-unit
/// scores, until the support reaches k_max or T iterations have run.
inline AllocationResult stepwise_optimize(const LossOracle& oracle, int budget, int k_max,
                                          int max_iterations) {
    if (k_max < 1 || max_iterations < 1) {
        throw std::invalid_argument("stepwise_optimize: k_max and T must be >= 1");
    }
    const int num_scores = oracle.num_scores();
    if (num_scores <= k_max) {
        std::vector<int> all(num_scores);
        std::iota(all.begin(), all.end(), 0);
        return exhaustive_search(oracle, all, budget);
    }

    // strict-improvement threshold; guards against float-noise loops
    constexpr double kImprovementEps = 1e-12;

    AllocationResult previous;
    previous.allocation.units.assign(num_scores, 0);
    previous.allocation.grid_n = oracle.grid_n();
    previous.loss = kInf;

    std::vector<int> selected;
    std::vector<TraceEntry> trace;
    for (int t = 1; t <= max_iterations; ++t) {
        int best_k = -1;
        AllocationResult best;
        best.loss = kInf;
        for (int k = 0; k < num_scores; ++k) {
            if (std::find(selected.begin(), selected.end(), k) != selected.end()) continue;
            std::vector<int> candidates = selected;
            candidates.push_back(k);
            AllocationResult res = exhaustive_search(oracle, std::move(candidates), budget);
            if (res.loss < best.loss) {
                best = std::move(res);
                best_k = k;
            }
        }
        if (best_k < 0 || !(best.loss < previous.loss - kImprovementEps)) {
            if (std::isinf(previous.loss)) previous.loss = oracle.loss(previous.allocation.units);
            previous.trace = std::move(trace);
            return previous;
        }
        trace.push_back({t, best_k, best.loss});
        selected = best.allocation.support();  // backward step: zero-unit indices drop out
        previous = std::move(best);
        if (static_cast<int>(selected.size()) >= k_max) break;
    }
    previous.trace = std::move(trace);
    return previous;
}

} // namespace cola

#endif // COLA_ALLOCATION_HPP
