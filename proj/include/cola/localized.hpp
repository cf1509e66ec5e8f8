#ifndef COLA_LOCALIZED_HPP
#define COLA_LOCALIZED_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cola/errors.hpp"
#include "cola/scores.hpp"

namespace cola {

struct KernelSpec {
    enum class Kind { Laplace };
    Kind kind = Kind::Laplace;
    double bandwidth = 1.0;
};

/// Normalized kernel similarities; raw_sum keeps the unnormalized total for
/// diagnostics and degeneracy detection.
struct WeightVector {
    std::vector<double> w;
    double raw_sum = 0.0;
};

inline double euclidean_distance(const FeatureVector& a, const FeatureVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("euclidean_distance: dimension mismatch");
    double ss = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        ss += d * d;
    }
    return std::sqrt(ss);
}

namespace detail {
inline std::vector<double> raw_similarities(const std::vector<FeatureVector>& xs,
                                            const FeatureVector& x_new,
                                            const KernelSpec& kernel) {
    if (kernel.bandwidth <= 0.0) throw std::invalid_argument("kernel bandwidth must be positive");
    std::vector<double> h(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        h[i] = std::exp(-euclidean_distance(xs[i], x_new) / kernel.bandwidth);
    }
    return h;
}
} // namespace detail

/// w_i proportional to exp(-||X_i - x_new|| / h), normalized to sum 1.
inline WeightVector kernel_weights(const std::vector<FeatureVector>& xs,
                                   const FeatureVector& x_new, const KernelSpec& kernel) {
    std::vector<double> h = detail::raw_similarities(xs, x_new, kernel);
    double total = 0.0;
    for (double v : h) total += v;
    if (total < 1e-300) {
        throw NumericError("kernel_weights: all similarities vanish; increase the bandwidth");
    }
    WeightVector out;
    out.raw_sum = total;
    out.w.resize(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out.w[i] = h[i] / total;
    return out;
}

/// (sum H)^2 / sum H^2 on unnormalized similarities; n when all are equal.
inline double effective_sample_size(const std::vector<FeatureVector>& xs,
                                    const FeatureVector& x_new, const KernelSpec& kernel) {
    std::vector<double> h = detail::raw_similarities(xs, x_new, kernel);
    double s1 = 0.0, s2 = 0.0;
    for (double v : h) {
        s1 += v;
        s2 += v * v;
    }
    if (s1 < 1e-300) {
        throw NumericError("effective_sample_size: all similarities vanish; increase the bandwidth");
    }
    return s1 * s1 / s2;
}

/// Bandwidth h = c n^{-1/(d+2)} with c bisected (60 iterations, bracket
/// [1e-6, 1e6] x data scale) so the mean ESS over the probe points is within
/// 1% of target_ess. Mean ESS is monotone increasing in h.
inline double calibrate_bandwidth(const std::vector<FeatureVector>& xs, double target_ess,
                                  const std::vector<FeatureVector>& probes) {
    if (xs.empty() || probes.empty()) {
        throw std::invalid_argument("calibrate_bandwidth: empty inputs");
    }
    const double n = static_cast<double>(xs.size());
    const double d = static_cast<double>(xs.front().size());
    if (!(target_ess > 1.0 && target_ess < n)) {
        throw std::invalid_argument("calibrate_bandwidth: target_ess must lie in (1, n)");
    }

    FeatureVector centroid(xs.front().size(), 0.0);
    for (const auto& x : xs) {
        for (std::size_t j = 0; j < x.size(); ++j) centroid[j] += x[j];
    }
    for (double& v : centroid) v /= n;
    double ms = 0.0;
    for (const auto& x : xs) {
        double dist = euclidean_distance(x, centroid);
        ms += dist * dist;
    }
    const double scale = std::max(std::sqrt(ms / n), 1e-12);
    const double rate = std::pow(n, -1.0 / (d + 2.0));

    auto mean_ess = [&](double c) {
        KernelSpec kernel{KernelSpec::Kind::Laplace, c * rate};
        double total = 0.0;
        for (const auto& p : probes) total += effective_sample_size(xs, p, kernel);
        return total / static_cast<double>(probes.size());
    };

    double c_lo = 1e-6 * scale, c_hi = 1e6 * scale;
    double ess_lo = mean_ess(c_lo), ess_hi = mean_ess(c_hi);
    if (ess_lo > target_ess || ess_hi < target_ess) {
        throw NumericError("calibrate_bandwidth: target ESS " + std::to_string(target_ess) +
                           " unreachable; achievable range [" + std::to_string(ess_lo) + ", " +
                           std::to_string(ess_hi) + "]");
    }
    for (int iter = 0; iter < 60; ++iter) {
        double mid = 0.5 * (c_lo + c_hi);
        if (mean_ess(mid) < target_ess) {
            c_lo = mid;
        } else {
            c_hi = mid;
        }
    }
    double c = 0.5 * (c_lo + c_hi);
    double achieved = mean_ess(c);
    if (std::fabs(achieved - target_ess) > 0.01 * target_ess) {
        throw NumericError("calibrate_bandwidth: bisection stalled at mean ESS " +
                           std::to_string(achieved) + " for target " +
                           std::to_string(target_ess));
    }
    return c * rate;
}

} // namespace cola

#endif // COLA_LOCALIZED_HPP
