#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "maclab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"maclab: numerical laboratory for the many-user GMAC with random user activity"};
    app.require_subcommand(1);

    const std::vector<std::string> commands = {
        "simulate-cdma", "simulate-sparc", "se-cdma",       "se-sparc",
        "potential",     "asymptotic-bounds", "finite-bounds", "sweep-region"};

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool have_seed = false, have_out = false, have_threads = false;

    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed, "override the RNG seed")
            ->each([&](const std::string&) { have_seed = true; });
        sub->add_option("--out", out_dir, "output directory")
            ->each([&](const std::string&) { have_out = true; });
        sub->add_option("--threads", threads, "worker threads (default: MACLAB_THREADS or all)")
            ->each([&](const std::string&) { have_threads = true; });
    }

    auto* agg = app.add_subcommand("aggregate", "summarize trial CSVs");
    std::vector<std::string> agg_inputs;
    std::string agg_out = "aggregate.csv";
    agg->add_option("inputs", agg_inputs, "trial CSV files")->required();
    agg->add_option("--out", agg_out, "summary CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (agg->parsed()) {
            maclab::aggregate_csvs(agg_inputs, agg_out);
            return 0;
        }
        maclab::RunOverrides ov;
        if (have_seed) ov.seed = seed;
        if (have_out) ov.out_dir = out_dir;
        if (have_threads) ov.threads = threads;
        for (const auto& name : commands)
            if (app.get_subcommand(name)->parsed())
                return maclab::run_from_file(name, config_path, ov);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
