#ifndef COLA_QUANTILES_HPP
#define COLA_QUANTILES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cola/errors.hpp"
#include "cola/interval_set.hpp"

namespace cola {

namespace detail {
// ceil with a small guard so grid-exact products like 0.9*(n+1) do not land
// one rank too high from float noise.
inline long ceil_rank(double x) { return static_cast<long>(std::ceil(x - 1e-9)); }
} // namespace detail

/// The (1-alpha) empirical quantile of values with an appended +inf element:
/// the r-th smallest of values where r = ceil((1-alpha)(n+1)); +inf when r > n.
inline double augmented_quantile(std::vector<double> values, double alpha) {
    if (values.empty()) throw std::invalid_argument("augmented_quantile: empty input");
    const long n = static_cast<long>(values.size());
    long r = detail::ceil_rank((1.0 - alpha) * static_cast<double>(n + 1));
    if (r > n) return kInf;
    if (r < 1) r = 1;
    std::nth_element(values.begin(), values.begin() + (r - 1), values.end());
    return values[r - 1];
}

/// Same quantile when the values are already sorted ascending.
inline double augmented_quantile_sorted(const std::vector<double>& sorted, double alpha) {
    if (sorted.empty()) throw std::invalid_argument("augmented_quantile: empty input");
    const long n = static_cast<long>(sorted.size());
    long r = detail::ceil_rank((1.0 - alpha) * static_cast<double>(n + 1));
    if (r > n) return kInf;
    if (r < 1) r = 1;
    return sorted[r - 1];
}

/// The (1-alpha) quantile of the weighted empirical distribution sum_i w_i d_{v_i}:
/// the smallest t among values with sum_{i: v_i <= t} w_i >= 1-alpha, or
/// max(values) when no value qualifies (only possible for alpha < 0 numerically).
inline double weighted_quantile(const std::vector<double>& values,
                                const std::vector<double>& weights, double alpha) {
    if (values.empty()) throw std::invalid_argument("weighted_quantile: empty input");
    if (values.size() != weights.size()) {
        throw std::invalid_argument("weighted_quantile: values/weights length mismatch");
    }
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0 || std::isnan(w)) throw std::invalid_argument("weighted_quantile: negative weight");
        wsum += w;
    }
    if (std::fabs(wsum - 1.0) > 1e-12) {
        throw std::invalid_argument("weighted_quantile: weights must sum to 1");
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
    const double target = 1.0 - alpha;
    double cum = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
        cum += weights[order[j]];
        // ties share one atom: only test the target after the last equal value
        if (j + 1 < order.size() && values[order[j + 1]] == values[order[j]]) continue;
        if (cum >= target) return values[order[j]];
    }
    return values[order.back()];
}

/// Conformal p-value of s_new against a calibration sample; ties count toward
/// the numerator: p = (1 + #{i: cal_i >= s_new}) / (n+1).
inline double conformal_p_value(const std::vector<double>& calibration, double s_new) {
    if (calibration.empty()) throw std::invalid_argument("conformal_p_value: empty input");
    std::size_t count = 0;
    for (double v : calibration) {
        if (v >= s_new) ++count;
    }
    return static_cast<double>(1 + count) / static_cast<double>(calibration.size() + 1);
}

} // namespace cola

#endif // COLA_QUANTILES_HPP
