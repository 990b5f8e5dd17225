// Experiment runner: reads a JSON experiment config, writes an RFC-4180 CSV.
//
//   rsma_cli run configs/fbl_sweep.json --output results.csv
//
// Exit codes: 0 success; 2 configuration or validation failure (no output file
// is written); 3 every solver call in the run failed. Progress goes to stderr,
// results only to the output file.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rsma/experiments.hpp"

namespace {

int run_experiment(const std::string& config_path, const std::string& output_override,
                   bool seed_given, std::uint64_t seed_override, bool no_timestamp,
                   int threads_override) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot read config file '" << config_path << "'\n";
        return 2;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();

    rsma::ExperimentConfig cfg;
    try {
        cfg = rsma::parse_experiment_config(buffer.str());
        if (seed_given) cfg.seed = seed_override;
        if (threads_override > 0) cfg.threads = threads_override;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    const std::string output = output_override.empty() ? cfg.output : output_override;
    if (output.empty()) {
        std::cerr << "error: no output path (set 'output' in the config or pass --output)\n";
        return 2;
    }

    // Validation is complete; only now is the output file touched.
    std::ofstream out(output, std::ios::binary);  // binary keeps CRLF exact
    if (!out) {
        std::cerr << "error: cannot open output file '" << output << "'\n";
        return 2;
    }

    std::cerr << "running " << rsma::experiment_name(cfg.kind) << " -> " << output << "\n";
    rsma::RunSummary summary;
    try {
        switch (cfg.kind) {
            case rsma::ExperimentKind::kFblSweep:
                summary = rsma::run_fbl_sweep(cfg.fbl, out, !no_timestamp, &std::cerr);
                break;
            case rsma::ExperimentKind::kMobilitySweep:
                summary = rsma::run_mobility_sweep(cfg.mobility, cfg.seed, cfg.threads, out,
                                                   !no_timestamp, &std::cerr);
                break;
            case rsma::ExperimentKind::kToptTable:
                summary = rsma::run_topt_table(cfg.topt, out, !no_timestamp, &std::cerr);
                break;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    std::cerr << "wrote " << summary.rows << " rows (" << summary.solves_succeeded << "/"
              << summary.solves_attempted << " solves succeeded)\n";
    if (summary.solves_attempted > 0 && summary.solves_succeeded == 0) {
        std::cerr << "error: every solve in the run failed\n";
        return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rate-splitting downlink experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::uint64_t seed_override = 0;
    bool no_timestamp = false;
    int threads_override = 0;

    CLI::App* run = app.add_subcommand("run", "run the experiment described by a JSON config");
    run->add_option("config", config_path, "path to the experiment config (JSON)")
        ->required();
    run->add_option("--output", output_override, "output CSV path (overrides the config)");
    CLI::Option* seed_opt =
        run->add_option("--seed", seed_override, "Monte Carlo base seed (overrides the config)");
    run->add_flag("--no-timestamp", no_timestamp,
                  "omit the generated_at header line for byte-reproducible output");
    run->add_option("--threads", threads_override,
                    "worker threads (never changes the numbers)")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    return run_experiment(config_path, output_override, !seed_opt->empty(), seed_override,
                          no_timestamp, threads_override);
}
