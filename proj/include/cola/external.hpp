#ifndef COLA_EXTERNAL_HPP
#define COLA_EXTERNAL_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cola/allocation.hpp"
#include "cola/csv.hpp"
#include "cola/errors.hpp"
#include "cola/experiment.hpp"
#include "cola/quantiles.hpp"

namespace cola {

namespace detail {

inline ScoreMatrix slice_rows(const ScoreMatrix& matrix, const std::vector<std::size_t>& rows) {
    std::vector<std::vector<double>> columns(matrix.cols());
    for (std::size_t k = 0; k < matrix.cols(); ++k) {
        columns[k].reserve(rows.size());
        for (std::size_t i : rows) columns[k].push_back(matrix.column(k)[i]);
    }
    return ScoreMatrix(std::move(columns));
}

} // namespace detail

/// External score-matrix mode: fit allocations on one half of the rows and
/// report coverage/size on the held-back half. Coverage is exact (a row is
/// covered iff S_ki <= t_k for every constrained score); sizes use the
/// common-center interval convention of make_external_oracle. Only methods
/// that need no evaluable score functions are supported.
inline std::vector<TrialRecord> run_external_experiment(const ScoreMatrix& matrix, double alpha,
                                                        std::uint64_t split_seed,
                                                        const std::vector<std::string>& methods) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (methods.empty()) throw ConfigError("no methods requested");
    for (const std::string& m : methods) {
        if (!known_methods().count(m)) throw ConfigError("unknown method '" + m + "'");
        if (m == "cola-f" || m == "cola-l" || m == "sat") {
            throw ConfigError("method '" + m +
                              "' needs evaluable score functions and cannot run on an external "
                              "score matrix");
        }
    }
    const std::size_t n = matrix.rows();
    if (n < 4) throw ConfigError("external mode needs at least 4 rows for nested splitting");
    const std::size_t num_scores = matrix.cols();

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(split_seed);
    rng.shuffle(perm);
    const std::size_t n_fit = n / 2;
    std::vector<std::size_t> fit_rows(perm.begin(), perm.begin() + n_fit);
    std::vector<std::size_t> eval_rows(perm.begin() + n_fit, perm.end());

    ScoreMatrix fit_matrix = detail::slice_rows(matrix, fit_rows);
    LossOracle fit_oracle = make_external_oracle(fit_matrix, alpha);

    // nested split of the fit fold for the sample-splitting methods
    const std::size_t n_tune = n_fit / 2;
    std::vector<std::size_t> perm2(n_fit);
    std::iota(perm2.begin(), perm2.end(), std::size_t{0});
    Rng rng2(split_seed ^ detail::kSplitSalt);
    rng2.shuffle(perm2);
    std::vector<std::size_t> tune_rows, cal_rows;
    for (std::size_t i = 0; i < n_fit; ++i) {
        (i < n_tune ? tune_rows : cal_rows).push_back(perm2[i]);
    }

    auto evaluate_thresholds = [&](const std::vector<double>& thresholds) {
        std::size_t covered = 0;
        for (std::size_t i : eval_rows) {
            bool inside = true;
            for (std::size_t k = 0; k < num_scores && inside; ++k) {
                inside = matrix.column(k)[i] <= thresholds[k];
            }
            if (inside) ++covered;
        }
        double min_t = kInf;
        for (double t : thresholds) min_t = std::min(min_t, t);
        detail::Evaluation eval;
        eval.coverage = static_cast<double>(covered) / static_cast<double>(eval_rows.size());
        eval.avg_size = std::isinf(min_t) ? kInf : std::max(0.0, 2.0 * min_t);
        return eval;
    };

    std::vector<TrialRecord> records;
    for (const std::string& method : methods) {
        std::vector<double> thresholds(num_scores, kInf);
        std::vector<int> alloc(num_scores, 0);
        detail::Evaluation eval{};

        if (method == "cola-e" || method == "efcp" || method == "random") {
            AllocationResult res;
            if (method == "cola-e") {
                res = stepwise_optimize(fit_oracle, fit_oracle.budget(), 4, 10);
            } else if (method == "efcp") {
                double best = kInf;
                int best_k = 0;
                for (std::size_t k = 0; k < num_scores; ++k) {
                    std::vector<int> units(num_scores, 0);
                    units[k] = fit_oracle.budget();
                    double l = fit_oracle.loss(units);
                    if (l < best) {
                        best = l;
                        best_k = static_cast<int>(k);
                    }
                }
                res.allocation.units.assign(num_scores, 0);
                res.allocation.units[best_k] = fit_oracle.budget();
                res.allocation.grid_n = fit_oracle.grid_n();
                res.loss = best;
            } else {
                Rng pick(split_seed ^ detail::kRandomSalt);
                res.allocation.units.assign(num_scores, 0);
                res.allocation.units[pick.uniform_index(num_scores)] = fit_oracle.budget();
                res.allocation.grid_n = fit_oracle.grid_n();
            }
            alloc = res.allocation.units;
            for (std::size_t k = 0; k < num_scores; ++k) {
                thresholds[k] = fit_oracle.threshold(static_cast<int>(k), alloc[k]);
            }
            eval = evaluate_thresholds(thresholds);
        } else if (method == "cola-s" || method == "vfcp") {
            ScoreMatrix tune_matrix = detail::slice_rows(fit_matrix, tune_rows);
            ScoreMatrix cal_matrix = detail::slice_rows(fit_matrix, cal_rows);
            LossOracle tune_oracle = make_external_oracle(tune_matrix, alpha);
            AllocationResult res;
            if (method == "cola-s") {
                res = stepwise_optimize(tune_oracle, tune_oracle.budget(), 4, 10);
            } else {
                double best = kInf;
                int best_k = 0;
                for (std::size_t k = 0; k < num_scores; ++k) {
                    std::vector<int> units(num_scores, 0);
                    units[k] = tune_oracle.budget();
                    double l = tune_oracle.loss(units);
                    if (l < best) {
                        best = l;
                        best_k = static_cast<int>(k);
                    }
                }
                res.allocation.units.assign(num_scores, 0);
                res.allocation.units[best_k] = tune_oracle.budget();
                res.allocation.grid_n = tune_oracle.grid_n();
            }
            alloc = res.allocation.units;
            for (std::size_t k = 0; k < num_scores; ++k) {
                thresholds[k] = alloc[k] == 0
                                    ? kInf
                                    : augmented_quantile(cal_matrix.column(k),
                                                         res.allocation.alpha_at(k));
            }
            eval = evaluate_thresholds(thresholds);
        } else {  // majority
            for (std::size_t k = 0; k < num_scores; ++k) {
                thresholds[k] = augmented_quantile(fit_matrix.column(k), alpha / 2.0);
            }
            std::size_t covered = 0;
            for (std::size_t i : eval_rows) {
                std::size_t count = 0;
                for (std::size_t k = 0; k < num_scores; ++k) {
                    if (matrix.column(k)[i] <= thresholds[k]) ++count;
                }
                if (2 * count > num_scores) ++covered;
            }
            std::vector<double> sorted_t = thresholds;
            std::sort(sorted_t.begin(), sorted_t.end(), std::greater<>());
            double radius = sorted_t[num_scores / 2];  // strict majority of centered intervals
            eval.coverage = static_cast<double>(covered) / static_cast<double>(eval_rows.size());
            eval.avg_size = std::isinf(radius) ? kInf : std::max(0.0, 2.0 * radius);
        }

        TrialRecord record;
        record.method = method;
        record.trial = 0;
        record.coverage = eval.coverage;
        record.avg_size = eval.avg_size;
        record.alloc = std::move(alloc);
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace cola

#endif // COLA_EXTERNAL_HPP
