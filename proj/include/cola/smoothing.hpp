#ifndef COLA_SMOOTHING_HPP
#define COLA_SMOOTHING_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cola/allocation.hpp"
#include "cola/errors.hpp"

namespace cola {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }
inline double normal_pdf(double z) { return 0.3989422804014326779 * std::exp(-0.5 * z * z); }

/// Kernel-smoothed empirical CDF: mean_i Phi((s - S_i) / tau2).
inline double smoothed_cdf(const std::vector<double>& scores, double tau2, double s) {
    if (tau2 <= 0.0) throw std::invalid_argument("smoothed_cdf: tau2 must be positive");
    double total = 0.0;
    for (double v : scores) total += normal_cdf((s - v) / tau2);
    return total / static_cast<double>(scores.size());
}

namespace detail {

// Same CDF on a sorted sample, skipping kernels more than 8 tau away
// (tail mass < 7e-16 per point).
inline double smoothed_cdf_sorted(const std::vector<double>& sorted, double tau2, double s) {
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), s - 8.0 * tau2);
    auto hi = std::upper_bound(lo, sorted.end(), s + 8.0 * tau2);
    double total = static_cast<double>(lo - sorted.begin());  // kernels fully below s
    for (auto it = lo; it != hi; ++it) total += normal_cdf((s - *it) / tau2);
    return total / static_cast<double>(sorted.size());
}

inline double smoothed_density_sum_sorted(const std::vector<double>& sorted, double tau2,
                                          double s) {
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), s - 8.0 * tau2);
    auto hi = std::upper_bound(lo, sorted.end(), s + 8.0 * tau2);
    double total = 0.0;
    for (auto it = lo; it != hi; ++it) total += normal_pdf((s - *it) / tau2);
    return total;
}

inline double bisect_smoothed_quantile(const std::vector<double>& sorted, double tau2,
                                       double target, double lo, double hi) {
    double flo = smoothed_cdf_sorted(sorted, tau2, lo) - target;
    double fhi = smoothed_cdf_sorted(sorted, tau2, hi) - target;
    if (flo > 0.0 || fhi < 0.0) {
        throw NumericError("smoothed_quantile: bisection bracket failure");
    }
    while (hi - lo > 1e-10) {
        double mid = 0.5 * (lo + hi);
        if (smoothed_cdf_sorted(sorted, tau2, mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// The s with smoothed_cdf(s) = 1 - alpha, by bisection to 1e-10 absolute
/// tolerance on the bracket [min - 10 tau2, max + 10 tau2].
inline double smoothed_quantile(const std::vector<double>& scores, double tau2, double alpha) {
    if (tau2 <= 0.0) throw std::invalid_argument("smoothed_quantile: tau2 must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("smoothed_quantile: alpha must lie in (0, 1)");
    }
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    return detail::bisect_smoothed_quantile(sorted, tau2, 1.0 - alpha,
                                            sorted.front() - 10.0 * tau2,
                                            sorted.back() + 10.0 * tau2);
}

/// Log-sum-exp relaxations of max and min at temperature tau1. soft_max lies
/// in [max, max + log(K)/tau1], soft_min in [min - log(K)/tau1, min].
inline double soft_max(const std::vector<double>& values, double tau1) {
    double m = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += std::exp(tau1 * (v - m));
    return m + std::log(sum) / tau1;
}

inline double soft_min(const std::vector<double>& values, double tau1) {
    double m = *std::min_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += std::exp(-tau1 * (v - m));
    return m - std::log(sum) / tau1;
}

struct SmoothingParams {
    double tau1 = 20.0;          // log-sum-exp temperature
    std::vector<double> tau2;    // per-score kernel bandwidths; empty = Silverman sigma_k n^{-1/5}
    double step_size = 0.05;     // initial projected-gradient step, adapted by backtracking
    int max_iterations = 150;
    double tolerance = 1e-8;     // on the max allocation change per iteration
    double alpha_floor = 1e-6;   // clamp keeping alpha_k inside (0, 1)
};

/// Silverman bandwidths sigma_k n^{-1/5} from the oracle's score columns.
inline std::vector<double> silverman_bandwidths(const LossOracle& oracle) {
    if (!oracle.has_columns()) {
        throw ConfigError("silverman_bandwidths: oracle carries no score columns");
    }
    std::vector<double> tau2(oracle.num_scores());
    for (int k = 0; k < oracle.num_scores(); ++k) {
        const auto& col = oracle.sorted_column(k);
        const double n = static_cast<double>(col.size());
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        double sd = col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        tau2[k] = std::max(sd, 1e-12) * std::pow(n, -0.2);
    }
    return tau2;
}

/// Euclidean projection onto {x >= floor, sum x = total}.
inline std::vector<double> project_to_simplex(std::vector<double> v, double total,
                                              double floor_value = 0.0) {
    const std::size_t n = v.size();
    double shifted_total = total - floor_value * static_cast<double>(n);
    if (shifted_total <= 0.0) {
        // degenerate: floors alone exhaust the budget
        return std::vector<double>(n, total / static_cast<double>(n));
    }
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = v[i] - floor_value;
    std::vector<double> sorted = u;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cum += sorted[j];
        double candidate = (cum - shifted_total) / static_cast<double>(j + 1);
        if (j + 1 == n || sorted[j + 1] <= candidate) {
            theta = candidate;
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) u[i] = std::max(u[i] - theta, 0.0) + floor_value;
    return u;
}

/// Round a real allocation to grid units summing to the budget by largest
/// remainder; remainder ties prefer lower indices.
inline std::vector<int> round_allocation_to_grid(const std::vector<double>& alpha_real,
                                                 int grid_n, int budget) {
    const std::size_t n = alpha_real.size();
    std::vector<int> units(n);
    std::vector<std::pair<double, std::size_t>> remainders(n);
    int assigned = 0;
    for (std::size_t k = 0; k < n; ++k) {
        double raw = std::max(alpha_real[k], 0.0) * static_cast<double>(grid_n);
        units[k] = static_cast<int>(std::floor(raw + 1e-12));
        remainders[k] = {raw - std::floor(raw + 1e-12), k};
        assigned += units[k];
    }
    int deficit = budget - assigned;
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    for (std::size_t j = 0; deficit > 0 && j < n; ++j, --deficit) ++units[remainders[j].second];
    for (std::size_t j = 0; deficit < 0 && j < n; ++j) {
        // over-assignment is possible only via the floor epsilon; shave largest units
        std::size_t k = remainders[n - 1 - j].second;
        if (units[k] > 0) {
            --units[k];
            ++deficit;
        }
    }
    return units;
}

/// Smoothed empirical loss (log-sum-exp min/max over per-point interval
/// endpoints, kernel-smoothed quantiles) and its gradient in alpha.
inline std::pair<double, std::vector<double>> smooth_loss_and_gradient(
    const LossOracle& oracle, const std::vector<double>& alpha_real,
    const SmoothingParams& params) {
    const int num_scores = oracle.num_scores();
    if (static_cast<int>(alpha_real.size()) != num_scores) {
        throw std::invalid_argument("smooth_loss_and_gradient: allocation length mismatch");
    }
    const std::vector<double> tau2 =
        params.tau2.empty() ? silverman_bandwidths(oracle) : params.tau2;

    std::vector<double> quantile(num_scores);
    std::vector<double> dquantile(num_scores);
    for (int k = 0; k < num_scores; ++k) {
        const auto& col = oracle.sorted_column(k);
        const double a = std::clamp(alpha_real[k], 1e-9, 1.0 - 1e-9);
        quantile[k] = detail::bisect_smoothed_quantile(col, tau2[k], 1.0 - a,
                                                       col.front() - 10.0 * tau2[k],
                                                       col.back() + 10.0 * tau2[k]);
        double density_sum = detail::smoothed_density_sum_sorted(col, tau2[k], quantile[k]);
        // d q / d alpha of the (1-alpha) smoothed quantile is negative
        dquantile[k] = -static_cast<double>(col.size()) * tau2[k] /
                       std::max(density_sum, 1e-300);
    }

    const double tau1 = params.tau1;
    const std::size_t num_points = oracle.num_eval_points();
    std::vector<double> hi(num_scores), lo(num_scores);
    std::vector<double> weight_sum(num_scores, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < num_points; ++i) {
        double hi_min = kInf, lo_max = -kInf;
        for (int k = 0; k < num_scores; ++k) {
            const SublevelGeometry& g = oracle.geometry(k, i);
            hi[k] = g.hi_base + g.slope * quantile[k];
            lo[k] = g.lo_base - g.slope * quantile[k];
            hi_min = std::min(hi_min, hi[k]);
            lo_max = std::max(lo_max, lo[k]);
        }
        double sum_min = 0.0, sum_max = 0.0;
        for (int k = 0; k < num_scores; ++k) {
            hi[k] = std::exp(-tau1 * (hi[k] - hi_min));  // reuse as unnormalized weights
            lo[k] = std::exp(tau1 * (lo[k] - lo_max));
            sum_min += hi[k];
            sum_max += lo[k];
        }
        double soft_min = hi_min - std::log(sum_min) / tau1;
        double soft_max = lo_max + std::log(sum_max) / tau1;
        total += soft_min - soft_max;
        for (int k = 0; k < num_scores; ++k) {
            const SublevelGeometry& g = oracle.geometry(k, i);
            weight_sum[k] += (hi[k] / sum_min + lo[k] / sum_max) * g.slope;
        }
    }

    std::vector<double> gradient(num_scores);
    for (int k = 0; k < num_scores; ++k) {
        gradient[k] = weight_sum[k] / static_cast<double>(num_points) * dquantile[k];
    }
    return {total / static_cast<double>(num_points), std::move(gradient)};
}

/// Projected gradient descent on the scaled simplex {alpha_k >= floor,
/// sum = budget_alpha}, with backtracking steps; the continuous solution is
/// rounded to the nearest grid allocation and its exact empirical loss is
/// reported.
inline AllocationResult projected_gradient_optimize(const LossOracle& oracle,
                                                    const SmoothingParams& params,
                                                    double budget_alpha) {
    const int num_scores = oracle.num_scores();
    if (num_scores < 2) {
        throw std::invalid_argument("projected_gradient_optimize: requires K >= 2");
    }
    SmoothingParams local = params;
    if (local.tau2.empty()) local.tau2 = silverman_bandwidths(oracle);
    const double floor_value =
        budget_alpha > 2.0 * local.alpha_floor * num_scores ? local.alpha_floor : 0.0;

    std::vector<double> x(num_scores, budget_alpha / num_scores);
    auto [loss, grad] = smooth_loss_and_gradient(oracle, x, local);

    std::vector<TraceEntry> trace;
    double step = local.step_size;
    for (int iter = 1; iter <= local.max_iterations; ++iter) {
        bool accepted = false;
        std::vector<double> candidate;
        double cand_loss = 0.0;
        std::vector<double> cand_grad;
        for (int tries = 0; tries < 30; ++tries) {
            candidate = x;
            for (int k = 0; k < num_scores; ++k) candidate[k] -= step * grad[k];
            candidate = project_to_simplex(std::move(candidate), budget_alpha, floor_value);
            std::tie(cand_loss, cand_grad) = smooth_loss_and_gradient(oracle, candidate, local);
            if (cand_loss <= loss) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        double max_change = 0.0;
        for (int k = 0; k < num_scores; ++k) {
            max_change = std::max(max_change, std::fabs(candidate[k] - x[k]));
        }
        x = std::move(candidate);
        loss = cand_loss;
        grad = std::move(cand_grad);
        step *= 1.2;
        trace.push_back({iter, -1, loss});
        if (max_change < local.tolerance) break;
    }

    AllocationResult result;
    result.allocation.units = round_allocation_to_grid(x, oracle.grid_n(), oracle.budget());
    result.allocation.grid_n = oracle.grid_n();
    result.loss = oracle.loss(result.allocation.units);
    result.support = result.allocation.support();
    result.trace = std::move(trace);
    return result;
}

} // namespace cola

#endif // COLA_SMOOTHING_HPP
