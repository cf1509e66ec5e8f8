// Acceptance suite: runs the numbered acceptance checks and prints one
// PASS/FAIL line per criterion. Usage: cola_acceptance [N|all] [path-to-cli].

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cola/csv.hpp"
#include "cola/experiment.hpp"
#include "cola/methods.hpp"
#include "cola/smoothing.hpp"
#include "test_instances.hpp"

using namespace cola;
using cola::testing::make_random_instance;

namespace {

std::string g_cli_path;

double mean_coverage(const std::vector<TrialRecord>& records, const std::string& method) {
    double total = 0.0, count = 0.0;
    for (const auto& r : records) {
        if (r.method == method) {
            total += r.coverage;
            count += 1.0;
        }
    }
    return total / count;
}

double mean_size(const std::vector<TrialRecord>& records, const std::string& method) {
    double total = 0.0, count = 0.0;
    for (const auto& r : records) {
        if (r.method == method) {
            total += r.avg_size;
            count += 1.0;
        }
    }
    return total / count;
}

// 1. stepwise <= EFCP <= every singleton, exactly, on 100 random instances
bool criterion_1(std::string& detail) {
    Rng rng(1001);
    int holds = 0;
    const int instances = 100;
    for (int rep = 0; rep < instances; ++rep) {
        int num_scores = 2 + static_cast<int>(rng.uniform_index(7));   // K in 2..8
        int n = 50 + static_cast<int>(rng.uniform_index(251));         // n in 50..300
        auto inst = make_random_instance(rng, num_scores, n, true);
        ScoreMatrix matrix = build_score_matrix(inst.specs, inst.xs, inst.ys);
        LossOracle oracle = make_marginal_oracle(inst.specs, matrix, inst.xs, 0.1);
        int budget = oracle.budget();

        AllocationResult step = stepwise_optimize(oracle, budget, 4, 10);
        double efcp = kInf;
        bool ok = true;
        for (int k = 0; k < num_scores; ++k) {
            std::vector<int> units(num_scores, 0);
            units[k] = budget;
            double singleton = oracle.loss(units);
            efcp = std::min(efcp, singleton);
        }
        for (int k = 0; k < num_scores; ++k) {
            std::vector<int> units(num_scores, 0);
            units[k] = budget;
            ok = ok && efcp <= oracle.loss(units) + 1e-12;
        }
        ok = ok && step.loss <= efcp + 1e-12;
        if (ok) ++holds;
    }
    detail = "dominance held on " + std::to_string(holds) + "/" + std::to_string(instances) +
             " instances";
    return holds == instances;
}

// 2. stepwise equals exhaustive under delegation; small mean gap at K=6, k_max=3
bool criterion_2(std::string& detail) {
    Rng rng(1002);
    int equal = 0;
    const int instances = 100;
    for (int rep = 0; rep < instances; ++rep) {
        auto inst = make_random_instance(rng, 3, 50, true);
        ScoreMatrix matrix = build_score_matrix(inst.specs, inst.xs, inst.ys);
        LossOracle oracle = make_marginal_oracle(inst.specs, matrix, inst.xs, 0.1);
        AllocationResult step = stepwise_optimize(oracle, oracle.budget(), 3, 10);
        AllocationResult exact = exhaustive_search(oracle, {0, 1, 2}, oracle.budget());
        if (step.loss == exact.loss && step.allocation.units == exact.allocation.units) {
            ++equal;
        }
    }

    double gap_sum = 0.0;
    bool ordered = true;
    for (int rep = 0; rep < instances; ++rep) {
        auto inst = make_random_instance(rng, 6, 50, true);
        ScoreMatrix matrix = build_score_matrix(inst.specs, inst.xs, inst.ys);
        LossOracle oracle = make_marginal_oracle(inst.specs, matrix, inst.xs, 0.1);
        AllocationResult step = stepwise_optimize(oracle, oracle.budget(), 3, 10);
        std::vector<int> all = {0, 1, 2, 3, 4, 5};
        AllocationResult exact = exhaustive_search(oracle, all, oracle.budget());
        ordered = ordered && step.loss >= exact.loss - 1e-12;
        gap_sum += (step.loss - exact.loss) / exact.loss;
    }
    double mean_gap = gap_sum / instances;
    detail = "delegation equal on " + std::to_string(equal) + "/100; mean relative gap " +
             detail::format_g6(mean_gap);
    return equal == instances && ordered && mean_gap <= 0.05;
}

// 3. COLA-s finite-sample coverage on Case 3
bool criterion_3(std::string& detail) {
    ExperimentConfig config;
    config.case_id = CaseId::Case3;
    config.alpha = 0.1;
    config.n_train = 150;
    config.n_holdout = 300;
    config.n_test = 40;
    config.trials = 500;
    config.base_seed = 30001;
    config.methods = {"cola-s"};
    auto records = run_experiment(config);
    double coverage = mean_coverage(records, "cola-s");
    double threshold = 0.90 - 3.0 * std::sqrt(0.09 / 20000.0);
    detail = "coverage " + detail::format_g6(coverage) + " vs threshold " +
             detail::format_g6(threshold);
    return coverage >= threshold;
}

// 4. COLA-e undercoverage shrinks with n on Case 3
bool criterion_4(std::string& detail) {
    ExperimentConfig config;
    config.case_id = CaseId::Case3;
    config.alpha = 0.1;
    config.n_train = 150;
    config.n_test = 40;
    config.trials = 300;
    config.base_seed = 40001;
    config.methods = {"cola-e"};

    config.n_holdout = 100;
    double coverage_small = mean_coverage(run_experiment(config), "cola-e");
    config.n_holdout = 600;
    double coverage_large = mean_coverage(run_experiment(config), "cola-e");
    detail = "coverage n=100: " + detail::format_g6(coverage_small) +
             ", n=600: " + detail::format_g6(coverage_large);
    return coverage_large >= 0.885 && coverage_large >= coverage_small - 0.01;
}

// 5. aggregation beats selection and set-level merging on complementary scores (soft target)
bool criterion_5(std::string& detail) {
    ExperimentConfig config;
    config.case_id = CaseId::Case2;
    config.alpha = 0.1;
    config.n_train = 150;
    config.n_holdout = 300;
    config.n_test = 40;
    config.trials = 300;
    config.base_seed = 50001;
    config.methods = {"cola-e", "efcp", "majority"};
    auto records = run_experiment(config);
    double cola = mean_size(records, "cola-e");
    double efcp_ratio = mean_size(records, "efcp") / cola;
    double majority_ratio = mean_size(records, "majority") / cola;
    detail = "size ratios vs cola-e: efcp " + detail::format_g6(efcp_ratio) + ", majority " +
             detail::format_g6(majority_ratio);
    return efcp_ratio >= 1.00 && majority_ratio >= 1.05;
}

// 6. COLA-f finite-sample coverage on the 1-D synthetic case
bool criterion_6(std::string& detail) {
    ExperimentConfig config;
    config.case_id = CaseId::Individual;
    config.alpha = 0.1;
    config.n_train = 150;
    config.n_holdout = 50;
    config.n_test = 1;
    config.trials = 500;
    config.base_seed = 60001;
    config.methods = {"cola-f"};
    config.ygrid_count = 200;
    auto records = run_experiment(config);
    double coverage = mean_coverage(records, "cola-f");
    double threshold = 0.90 - 3.0 * std::sqrt(0.09 / 500.0);
    detail = "coverage " + detail::format_g6(coverage) + " vs threshold " +
             detail::format_g6(threshold);
    return coverage >= threshold;
}

// 7. COLA-l conditional coverage and local size advantage
bool criterion_7(std::string& detail) {
    const double alpha = 0.1;
    DatasetTriple data = generate(CaseId::Individual, 1000, 2000, 1, 70001);
    std::vector<ScoreSpec> specs =
        make_case_score_specs(CaseId::Individual, data.train, alpha, 70001);
    KernelSpec kernel;
    kernel.bandwidth = calibrate_bandwidth(data.holdout.X, 200.0, data.holdout.X);

    ConformalPredictor global = fit_cola_e(specs, data.holdout.X, data.holdout.y, alpha);

    int local_wins = 0;
    bool coverage_ok = true;
    std::string coverage_report;
    Rng fresh(70002);
    for (int j = 0; j < 21; ++j) {
        double x = -1.0 + 2.0 * j / 20.0;
        FeatureVector probe = {x};
        PredictionSet local_set =
            predict_cola_l(specs, data.holdout.X, data.holdout.y, alpha, probe, kernel);
        if (local_set.measure() <= global.predict(probe).measure()) ++local_wins;

        if (j == 0 || j == 10 || j == 20) {  // x in {-1, 0, 1}
            int covered = 0;
            const int draws = 2000;
            double sd = 0.25 + 0.25 * std::fabs(x);
            for (int rep = 0; rep < draws; ++rep) {
                double y = detail::individual_signal(x) + sd * fresh.normal();
                if (local_set.contains(y)) ++covered;
            }
            double rate = static_cast<double>(covered) / draws;
            coverage_ok = coverage_ok && rate >= 0.87;
            coverage_report += " " + detail::format_g6(rate);
        }
    }
    detail = "conditional coverage at {-1,0,1}:" + coverage_report + "; local size wins " +
             std::to_string(local_wins) + "/21";
    return coverage_ok && local_wins >= 11;
}

// 8. oracle equivalences: weighted quantile, majority vote, smooth gradient
bool criterion_8(std::string& detail) {
    Rng rng(8001);

    int quantile_matches = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        int n = 1 + static_cast<int>(rng.uniform_index(40));
        std::vector<double> values(n), weights(n);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            values[i] = rng.normal();
            weights[i] = rng.uniform(0.0, 1.0);
            total += weights[i];
        }
        for (double& w : weights) w /= total;
        double alpha = rng.uniform(0.01, 0.99);

        // brute force: recompute the cumulative weight from scratch per candidate
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        double expected = sorted.back();
        for (double t : sorted) {
            double cum = 0.0;
            for (int i = 0; i < n; ++i) {
                if (values[i] <= t) cum += weights[i];
            }
            if (cum >= 1.0 - alpha) {
                expected = t;
                break;
            }
        }
        if (weighted_quantile(values, weights, alpha) == expected) ++quantile_matches;
    }

    int majority_matches = 0;
    for (int rep = 0; rep < 100; ++rep) {
        int num_sets = 1 + static_cast<int>(rng.uniform_index(6));
        std::vector<IntervalUnion> sets;
        for (int k = 0; k < num_sets; ++k) {
            std::vector<Interval> raw;
            int pieces = 1 + static_cast<int>(rng.uniform_index(3));
            for (int j = 0; j < pieces; ++j) {
                double a = rng.uniform(-8.0, 8.0);
                raw.push_back({a, a + rng.uniform(0.0, 4.0)});
            }
            sets.push_back(IntervalUnion::normalized(std::move(raw)));
        }
        PredictionSet vote = majority_vote_of_sets(sets);
        const int grid_points = 26001;
        const double cell = 26.0 / (grid_points - 1);  // grid covers every endpoint
        int dense_count = 0;
        for (int g = 0; g < grid_points; ++g) {
            double y = -13.0 + g * cell;
            std::size_t c = 0;
            for (const auto& s : sets) c += s.contains(y) ? 1 : 0;
            if (2 * c > sets.size()) ++dense_count;
        }
        if (std::fabs(vote.measure() - dense_count * cell) <= cell * (6 * num_sets + 2)) {
            ++majority_matches;
        }
    }

    int gradient_matches = 0;
    for (int rep = 0; rep < 100; ++rep) {
        int num_scores = 2 + static_cast<int>(rng.uniform_index(3));
        auto inst = make_random_instance(rng, num_scores, 40, true);
        ScoreMatrix matrix = build_score_matrix(inst.specs, inst.xs, inst.ys);
        LossOracle oracle = make_marginal_oracle(inst.specs, matrix, inst.xs, 0.2);
        SmoothingParams params;
        params.tau2 = silverman_bandwidths(oracle);
        std::vector<double> alpha(num_scores);
        double total = 0.0;
        for (double& a : alpha) {
            a = rng.uniform(0.02, 0.2);
            total += a;
        }
        for (double& a : alpha) a *= 0.2 / total;
        auto [loss, grad] = smooth_loss_and_gradient(oracle, alpha, params);
        (void)loss;
        bool ok = true;
        const double h = 1e-5;
        for (int k = 0; k < num_scores; ++k) {
            std::vector<double> up = alpha, down = alpha;
            up[k] += h;
            down[k] -= h;
            double fd = (smooth_loss_and_gradient(oracle, up, params).first -
                         smooth_loss_and_gradient(oracle, down, params).first) /
                        (2 * h);
            ok = ok && std::fabs(grad[k] - fd) <= 1e-4 * std::max(std::fabs(fd), 1e-3);
        }
        if (ok) ++gradient_matches;
    }

    detail = "weighted quantile " + std::to_string(quantile_matches) +
             "/1000 exact; majority vote " + std::to_string(majority_matches) +
             "/100 within one cell; gradient " + std::to_string(gradient_matches) +
             "/100 within 1e-4";
    return quantile_matches == 1000 && majority_matches == 100 && gradient_matches == 100;
}

// 9. stepwise beats the smoothing relaxation at K=100
bool criterion_9(std::string& detail) {
    const int trials = 50;
    int stepwise_wins = 0;
    for (int trial = 0; trial < trials; ++trial) {
        std::uint64_t seed = 90001 + static_cast<std::uint64_t>(trial);
        DatasetTriple data = generate(CaseId::Case3, 150, 300, 1, seed);
        std::vector<ScoreSpec> specs =
            make_case_score_specs(CaseId::Case3, data.train, 0.1, seed, 100);
        ScoreMatrix matrix = build_score_matrix(specs, data.holdout.X, data.holdout.y);
        LossOracle oracle = make_marginal_oracle(specs, matrix, data.holdout.X, 0.1);

        AllocationResult step = stepwise_optimize(oracle, oracle.budget(), 4, 10);
        AllocationResult smooth = projected_gradient_optimize(oracle, {}, 0.1);
        if (step.loss <= smooth.loss + 1e-12) ++stepwise_wins;
    }
    detail = "stepwise at least as good in " + std::to_string(stepwise_wins) + "/" +
             std::to_string(trials) + " trials";
    return stepwise_wins * 10 >= trials * 9;
}

// 10. byte-identical CSV from repeated identical simulate invocations
bool criterion_10(std::string& detail) {
    if (g_cli_path.empty()) {
        detail = "cli path not supplied";
        return false;
    }
    std::string out1 = "/tmp/cola_accept_det1.csv";
    std::string out2 = "/tmp/cola_accept_det2.csv";
    std::string flags =
        " simulate --case 2 --alpha 0.1 --n-train 50 --n-holdout 40 --n-test 6 --trials 2"
        " --seed 12 --methods cola-e,cola-s,cola-f,cola-l,efcp,vfcp,majority,sat,random"
        " --ygrid-count 80 --target-ess 20 --out ";
    std::string cmd1 = g_cli_path + flags + out1 + " > /dev/null";
    std::string cmd2 = g_cli_path + flags + out2 + " > /dev/null";
    if (std::system(cmd1.c_str()) != 0 || std::system(cmd2.c_str()) != 0) {
        detail = "cli invocation failed";
        return false;
    }
    auto read = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::string a = read(out1), b = read(out2);
    std::remove(out1.c_str());
    std::remove(out2.c_str());
    detail = "two runs, " + std::to_string(a.size()) + " bytes each, " +
             (a == b ? "identical" : "DIFFERENT");
    return !a.empty() && a == b;
}

} // namespace

int main(int argc, char** argv) {
    std::string which = argc > 1 ? argv[1] : "all";
    if (argc > 2) g_cli_path = argv[2];

    std::vector<std::pair<int, std::function<bool(std::string&)>>> criteria = {
        {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},
        {5, criterion_5}, {6, criterion_6}, {7, criterion_7}, {8, criterion_8},
        {9, criterion_9}, {10, criterion_10},
    };

    static const char* names[] = {
        "exact dominance stepwise <= EFCP <= singletons",
        "stepwise vs exhaustive (delegation + gap)",
        "COLA-s finite-sample coverage (Case 3)",
        "COLA-e coverage improves with n (Case 3)",
        "aggregation beats selection on complementary scores (soft)",
        "COLA-f finite-sample coverage (1-D)",
        "COLA-l conditional coverage and local size",
        "oracle equivalences (quantile, majority, gradient)",
        "stepwise vs smoothing at K=100",
        "byte-identical simulate output",
    };

    bool all_pass = true;
    int ran = 0;
    for (auto& [id, fn] : criteria) {
        if (which != "all" && std::stoi(which) != id) continue;
        ++ran;
        std::string detail;
        bool pass = false;
        try {
            pass = fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %2d %s: %s (%s)\n", id, pass ? "PASS" : "FAIL", names[id - 1],
                    detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && pass;
    }
    if (ran == 0) {
        std::fprintf(stderr, "no such criterion: %s\n", which.c_str());
        return 2;
    }
    return all_pass ? 0 : 1;
}
