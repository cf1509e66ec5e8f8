// cola: command-line front end for confidence-level allocation experiments.
// Exit codes: 0 success, 2 config error, 3 data/parse error, 4 numerical error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cola/csv.hpp"
#include "cola/experiment.hpp"
#include "cola/external.hpp"
#include "cola/smoothing.hpp"

namespace {

// key=value config file; values apply only to options not given on the
// command line, so flags override the file.
void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cola::ConfigError("config file: cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line.substr(line.find_first_not_of(" \t") == std::string::npos
                                              ? line.size()
                                              : line.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw cola::ConfigError("config file: expected key=value at line " +
                                    std::to_string(line_no));
        }
        std::string key = trimmed.substr(0, eq);
        std::string value = trimmed.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        while (!value.empty() && (value.front() == ' ' || value.front() == '\t')) {
            value.erase(value.begin());
        }
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt) {
            throw cola::ConfigError("config file: unknown key '" + key + "' at line " +
                                    std::to_string(line_no));
        }
        if (opt->count() == 0) {
            opt->add_result(value);
            opt->run_callback();
        }
    }
}

std::vector<std::string> parse_method_list(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void print_summary(const std::vector<cola::TrialRecord>& records,
                   const std::string& reference) {
    auto rows = cola::summarize(records, reference);
    std::printf("%-10s %10s %10s %10s %10s %12s\n", "method", "coverage", "se", "size", "se",
                "size/ref");
    for (const auto& s : rows) {
        std::printf("%-10s %10s %10s %10s %10s %12s%s\n", s.method.c_str(),
                    cola::detail::format_g6(s.mean_coverage).c_str(),
                    cola::detail::format_g6(s.se_coverage).c_str(),
                    cola::detail::format_g6(s.mean_size).c_str(),
                    cola::detail::format_g6(s.se_size).c_str(),
                    cola::detail::format_g6(s.size_ratio).c_str(),
                    s.ratio_flagged ? " (flagged)" : "");
    }
}

struct SimulateArgs {
    std::string case_name = "1";
    double alpha = 0.1;
    int n_train = 150;
    int n_holdout = 300;
    int n_test = 40;
    int trials = 1;
    std::uint64_t seed = 1;
    std::string methods = "cola-e";
    int k_max = 4;
    std::string out_path;
    int ygrid_count = 200;
    double target_ess = 200.0;
    bool timing = false;
};

struct RunArgs {
    std::string scores_path;
    double alpha = 0.1;
    std::uint64_t split_seed = 1;
    std::string methods = "cola-e,efcp";
    std::string out_path;
};

struct AllocateArgs {
    std::string scores_path;
    double alpha = 0.1;
    std::string optimizer = "stepwise";
};

int run_simulate(const SimulateArgs& args) {
    cola::ExperimentConfig config;
    config.case_id = cola::parse_case_id(args.case_name);
    config.alpha = args.alpha;
    config.n_train = args.n_train;
    config.n_holdout = args.n_holdout;
    config.n_test = args.n_test;
    config.trials = args.trials;
    config.base_seed = args.seed;
    config.methods = parse_method_list(args.methods);
    config.optimizer.k_max = args.k_max;
    config.ygrid_count = args.ygrid_count;
    config.target_ess = args.target_ess;
    config.record_timing = args.timing;

    auto records = cola::run_experiment(config);
    cola::write_results_csv(records, args.out_path);
    if (!config.methods.empty()) print_summary(records, config.methods.front());
    std::printf("wrote %zu records to %s\n", records.size(), args.out_path.c_str());
    return 0;
}

int run_external(const RunArgs& args) {
    auto ingested = cola::ingest_scores_csv(args.scores_path);
    auto methods = parse_method_list(args.methods);
    auto records =
        cola::run_external_experiment(ingested.matrix, args.alpha, args.split_seed, methods);
    cola::write_results_csv(records, args.out_path);
    if (!methods.empty()) print_summary(records, methods.front());
    std::printf("wrote %zu records to %s\n", records.size(), args.out_path.c_str());
    return 0;
}

int run_allocate(const AllocateArgs& args) {
    auto ingested = cola::ingest_scores_csv(args.scores_path);
    cola::LossOracle oracle = cola::make_external_oracle(ingested.matrix, args.alpha);

    cola::AllocationResult result;
    if (args.optimizer == "stepwise") {
        result = cola::stepwise_optimize(oracle, oracle.budget(), 4, 10);
    } else if (args.optimizer == "exhaustive") {
        std::vector<int> all(oracle.num_scores());
        std::iota(all.begin(), all.end(), 0);
        result = cola::exhaustive_search(oracle, all, oracle.budget());
    } else if (args.optimizer == "smooth") {
        result = cola::projected_gradient_optimize(oracle, {}, args.alpha);
    } else {
        throw cola::ConfigError("unknown optimizer '" + args.optimizer +
                                "' (expected stepwise, exhaustive or smooth)");
    }

    std::printf("alloc,loss\n");
    std::string joined;
    for (std::size_t k = 0; k < result.allocation.units.size(); ++k) {
        if (k) joined += '/';
        joined += std::to_string(result.allocation.units[k]);
    }
    std::printf("%s,%s\n", joined.c_str(), cola::detail::format_g6(result.loss).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"COLA: aggregating conformal prediction sets by confidence-level allocation"};
    app.require_subcommand(1);

    std::string sim_config, run_config, alloc_config;

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo synthetic experiments");
    simulate->add_option("--config", sim_config, "key=value config file");
    simulate->add_option("--case", sim.case_name, "DGP: 1, 2, 3 or individual");
    simulate->add_option("--alpha", sim.alpha, "nominal miscoverage level");
    simulate->add_option("--n-train", sim.n_train, "training rows per trial");
    simulate->add_option("--n-holdout", sim.n_holdout, "holdout rows per trial");
    simulate->add_option("--n-test", sim.n_test, "test rows per trial");
    simulate->add_option("--trials", sim.trials, "number of independent trials");
    simulate->add_option("--seed", sim.seed, "base seed; trial t uses seed+t");
    simulate->add_option("--methods", sim.methods, "comma-separated method list");
    simulate->add_option("--k-max", sim.k_max, "stepwise support cap");
    simulate->add_option("--out", sim.out_path, "output CSV path");
    simulate->add_option("--ygrid-count", sim.ygrid_count, "label grid size for cola-f/sat");
    simulate->add_option("--target-ess", sim.target_ess, "bandwidth target ESS for cola-l");
    simulate->add_flag("--timing", sim.timing,
                       "record wall times in the CSV (breaks byte determinism)");

    RunArgs run;
    CLI::App* run_cmd = app.add_subcommand("run", "external score-matrix mode");
    run_cmd->add_option("--config", run_config, "key=value config file");
    run_cmd->add_option("--scores", run.scores_path, "score matrix CSV (s1,...,sK[,y])");
    run_cmd->add_option("--alpha", run.alpha, "nominal miscoverage level");
    run_cmd->add_option("--split-seed", run.split_seed, "seed for the nested splits");
    run_cmd->add_option("--methods", run.methods, "comma-separated method list");
    run_cmd->add_option("--out", run.out_path, "output CSV path");

    AllocateArgs alloc;
    CLI::App* alloc_cmd = app.add_subcommand("allocate", "fit one allocation on a score matrix");
    alloc_cmd->add_option("--config", alloc_config, "key=value config file");
    alloc_cmd->add_option("--scores", alloc.scores_path, "score matrix CSV (s1,...,sK[,y])");
    alloc_cmd->add_option("--alpha", alloc.alpha, "nominal miscoverage level");
    alloc_cmd->add_option("--optimizer", alloc.optimizer, "stepwise, exhaustive or smooth");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) {
            if (!sim_config.empty()) apply_config_file(simulate, sim_config);
            if (sim.out_path.empty()) throw cola::ConfigError("simulate: --out is required");
            return run_simulate(sim);
        }
        if (run_cmd->parsed()) {
            if (!run_config.empty()) apply_config_file(run_cmd, run_config);
            if (run.scores_path.empty()) throw cola::ConfigError("run: --scores is required");
            if (run.out_path.empty()) throw cola::ConfigError("run: --out is required");
            return run_external(run);
        }
        if (!alloc_config.empty()) apply_config_file(alloc_cmd, alloc_config);
        if (alloc.scores_path.empty()) {
            throw cola::ConfigError("allocate: --scores is required");
        }
        return run_allocate(alloc);
    } catch (const cola::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cola::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const cola::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
