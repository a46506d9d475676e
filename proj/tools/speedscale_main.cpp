#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "speedscale/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"speedscale: dynamic speed-scaling experiments"};

    std::string experiment;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 12345;
    bool full = false;
    bool svg = false;
    int threads = 0;

    app.add_option("experiment", experiment,
                   "one of: via-convergence, policy-compare, bellman-report, tdpia-run, "
                   "basis-compare, variance-study, fluid-eval")
        ->required();
    app.add_option("--config", config_path, "config file (key=value lines or a JSON object)");
    app.add_option("--seed", seed, "master seed for all replication substreams");
    app.add_option("--out", out_dir, "output directory (default out/<experiment>)");
    app.add_flag("--full", full, "restore the full replication scale (1000)");
    app.add_flag("--svg", svg, "also emit SVG plots next to the CSVs");
    app.add_option("--threads", threads, "worker threads for replications (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        speedscale::Config cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        cfg.full = full || cfg.full;
        cfg.svg = svg || cfg.svg;
        if (threads > 0) cfg.threads = threads;
        if (out_dir.empty()) out_dir = "out/" + experiment;
        speedscale::run_experiment(experiment, cfg, seed, out_dir);
        std::cout << "wrote results to " << out_dir << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage/config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
