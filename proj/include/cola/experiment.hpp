#ifndef COLA_EXPERIMENT_HPP
#define COLA_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cola/datagen.hpp"
#include "cola/errors.hpp"
#include "cola/localized.hpp"
#include "cola/methods.hpp"
#include "cola/scores.hpp"

namespace cola {

inline const std::set<std::string>& known_methods() {
    static const std::set<std::string> methods = {"cola-e", "cola-s", "cola-f", "cola-l",
                                                  "efcp",   "vfcp",   "majority", "sat",
                                                  "random"};
    return methods;
}

struct ExperimentConfig {
    CaseId case_id = CaseId::Case1;
    double alpha = 0.1;
    int n_train = 150;
    int n_holdout = 300;
    int n_test = 40;
    int trials = 1;
    std::uint64_t base_seed = 1;
    std::vector<std::string> methods = {"cola-e"};
    OptimizerOptions optimizer;
    int ygrid_count = 200;
    double target_ess = 200.0;
    int case3_submodels = 4;
    bool record_timing = false;
};

struct TrialRecord {
    std::string method;
    int trial = 0;
    double coverage = 0.0;
    double avg_size = 0.0;
    double wall_ms = 0.0;
    std::vector<int> alloc;
    double fit_loss = kInf;  // diagnostic; achieved L_n for methods that fit one allocation
};

namespace detail {

// Salts decorrelate the per-trial streams (data draw, shared split, random pick).
inline constexpr std::uint64_t kSplitSalt = 0x7de353db8260f177ULL;
inline constexpr std::uint64_t kRandomSalt = 0x2545f4914f6cdd1dULL;

struct Evaluation {
    double coverage;
    double avg_size;
};

template <typename SetFn>
Evaluation evaluate_on_test(const Dataset& test, SetFn&& predict_set) {
    std::size_t covered = 0;
    double total_size = 0.0;
    for (std::size_t i = 0; i < test.X.size(); ++i) {
        PredictionSet set = predict_set(test.X[i]);
        if (set.contains(test.y[i])) ++covered;
        total_size += set.measure();
    }
    double n = static_cast<double>(test.X.size());
    return {static_cast<double>(covered) / n, total_size / n};
}

} // namespace detail

inline void validate_config(const ExperimentConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1)");
    }
    if (config.trials < 1) throw ConfigError("trials must be >= 1");
    if (config.n_train < 1 || config.n_holdout < 1 || config.n_test < 1) {
        throw ConfigError("all sizes must be >= 1");
    }
    if (config.methods.empty()) throw ConfigError("no methods requested");
    for (const std::string& m : config.methods) {
        if (!known_methods().count(m)) throw ConfigError("unknown method '" + m + "'");
    }
    bool wants_label_grid =
        std::count(config.methods.begin(), config.methods.end(), "cola-f") ||
        std::count(config.methods.begin(), config.methods.end(), "sat");
    if (wants_label_grid && config.ygrid_count < 2) {
        throw ConfigError("ygrid-count must be >= 2 for cola-f/sat");
    }
    if (std::count(config.methods.begin(), config.methods.end(), "cola-l") &&
        !(config.target_ess > 1.0 && config.target_ess < config.n_holdout)) {
        throw ConfigError("target-ess must lie in (1, n_holdout) for cola-l");
    }
    if (config.optimizer.k_max < 1 || config.optimizer.max_iterations < 1) {
        throw ConfigError("optimizer options must be >= 1");
    }
}

/// Run every requested method on the same per-trial data (paired comparison).
/// Deterministic given the config: trial seeds are base_seed + trial index,
/// and COLA-s/VFCP share one split permutation per trial.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    std::vector<TrialRecord> records;
    records.reserve(static_cast<std::size_t>(config.trials) * config.methods.size());

    for (int trial = 0; trial < config.trials; ++trial) {
        const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(trial);
        DatasetTriple data =
            generate(config.case_id, config.n_train, config.n_holdout, config.n_test, seed);
        std::vector<ScoreSpec> specs = make_case_score_specs(
            config.case_id, data.train, config.alpha, seed, config.case3_submodels);
        const std::uint64_t split_seed = seed ^ detail::kSplitSalt;

        YGrid grid;
        bool need_grid =
            std::count(config.methods.begin(), config.methods.end(), "cola-f") ||
            std::count(config.methods.begin(), config.methods.end(), "sat");
        if (need_grid) grid = YGrid::from_labels(data.holdout.y, config.ygrid_count);

        KernelSpec kernel;
        if (std::count(config.methods.begin(), config.methods.end(), "cola-l")) {
            kernel.bandwidth =
                calibrate_bandwidth(data.holdout.X, config.target_ess, data.holdout.X);
        }

        for (const std::string& method : config.methods) {
            auto start = std::chrono::steady_clock::now();
            detail::Evaluation eval{};
            std::vector<int> alloc(specs.size(), 0);
            double fit_loss = kInf;

            if (method == "cola-e" || method == "cola-s" || method == "efcp" ||
                method == "vfcp" || method == "random") {
                ConformalPredictor predictor;
                if (method == "cola-e") {
                    predictor = fit_cola_e(specs, data.holdout.X, data.holdout.y, config.alpha,
                                           config.optimizer);
                } else if (method == "cola-s") {
                    predictor = fit_cola_s(specs, data.holdout.X, data.holdout.y, config.alpha,
                                           split_seed, config.optimizer);
                } else if (method == "efcp") {
                    predictor = fit_efcp(specs, data.holdout.X, data.holdout.y, config.alpha);
                } else if (method == "vfcp") {
                    predictor = fit_vfcp(specs, data.holdout.X, data.holdout.y, config.alpha,
                                         split_seed);
                } else {
                    predictor = fit_random_select(specs, data.holdout.X, data.holdout.y,
                                                  config.alpha, seed ^ detail::kRandomSalt);
                }
                alloc = predictor.allocation.units;
                fit_loss = predictor.fit_loss;
                eval = detail::evaluate_on_test(
                    data.test, [&](const FeatureVector& x) { return predictor.predict(x); });
            } else if (method == "cola-f") {
                eval = detail::evaluate_on_test(data.test, [&](const FeatureVector& x) {
                    return predict_cola_f(specs, data.holdout.X, data.holdout.y, config.alpha,
                                          x, grid, config.optimizer);
                });
            } else if (method == "cola-l") {
                eval = detail::evaluate_on_test(data.test, [&](const FeatureVector& x) {
                    return predict_cola_l(specs, data.holdout.X, data.holdout.y, config.alpha,
                                          x, kernel, config.optimizer);
                });
            } else if (method == "majority") {
                eval = detail::evaluate_on_test(data.test, [&](const FeatureVector& x) {
                    return predict_majority_vote(specs, data.holdout.X, data.holdout.y,
                                                 config.alpha, x);
                });
            } else {  // sat
                eval = detail::evaluate_on_test(data.test, [&](const FeatureVector& x) {
                    return predict_sat(specs, data.holdout.X, data.holdout.y, config.alpha, x,
                                       grid);
                });
            }

            auto elapsed = std::chrono::steady_clock::now() - start;
            TrialRecord record;
            record.method = method;
            record.trial = trial;
            record.coverage = eval.coverage;
            record.avg_size = eval.avg_size;
            record.wall_ms =
                config.record_timing
                    ? std::chrono::duration<double, std::milli>(elapsed).count()
                    : 0.0;
            record.alloc = std::move(alloc);
            record.fit_loss = fit_loss;
            records.push_back(std::move(record));
        }
    }
    return records;
}

struct MethodSummary {
    std::string method;
    double mean_coverage = 0.0;
    double se_coverage = 0.0;
    double mean_size = 0.0;
    double se_size = 0.0;
    double size_ratio = 1.0;  // mean size relative to the reference method
    bool ratio_flagged = false;
};

/// Per-method means and standard errors plus size ratios against a reference
/// method (typically cola-e).
inline std::vector<MethodSummary> summarize(const std::vector<TrialRecord>& records,
                                            const std::string& reference) {
    if (records.empty()) throw std::invalid_argument("summarize: no records");
    std::vector<std::string> order;
    for (const TrialRecord& r : records) {
        if (std::find(order.begin(), order.end(), r.method) == order.end()) {
            order.push_back(r.method);
        }
    }
    if (std::find(order.begin(), order.end(), reference) == order.end()) {
        throw ConfigError("summarize: reference method '" + reference + "' absent");
    }

    auto method_stats = [&](const std::string& method) {
        double n = 0.0, mean_cov = 0.0, mean_size = 0.0;
        for (const TrialRecord& r : records) {
            if (r.method != method) continue;
            n += 1.0;
            mean_cov += r.coverage;
            mean_size += r.avg_size;
        }
        mean_cov /= n;
        mean_size /= n;
        double var_cov = 0.0, var_size = 0.0;
        for (const TrialRecord& r : records) {
            if (r.method != method) continue;
            var_cov += (r.coverage - mean_cov) * (r.coverage - mean_cov);
            var_size += (r.avg_size - mean_size) * (r.avg_size - mean_size);
        }
        MethodSummary s;
        s.method = method;
        s.mean_coverage = mean_cov;
        s.mean_size = mean_size;
        if (n > 1.0) {
            s.se_coverage = std::sqrt(var_cov / (n - 1.0) / n);
            s.se_size = std::isfinite(mean_size) ? std::sqrt(var_size / (n - 1.0) / n) : kInf;
        }
        return s;
    };

    double reference_size = method_stats(reference).mean_size;
    std::vector<MethodSummary> out;
    for (const std::string& method : order) {
        MethodSummary s = method_stats(method);
        if (!std::isfinite(s.mean_size) || !std::isfinite(reference_size) ||
            reference_size <= 0.0) {
            s.size_ratio = kInf;
            s.ratio_flagged = true;
        } else {
            s.size_ratio = s.mean_size / reference_size;
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace cola

#endif // COLA_EXPERIMENT_HPP
