#include <CLI11.hpp>

#include "simclock/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"simclock - stochastic simulator for an entanglement-assisted Ramsey clock"};
    app.require_subcommand(0);

    simclock::cli::RunOptions opt;
    std::string preset_help = "preset: one of";
    for (const auto& [name, p] : simclock::presets::preset_names()) preset_help += " " + name;

    app.add_option("preset", opt.preset, preset_help)->required();
    app.add_option("--config", opt.config_path, "configuration file (INI sections, unit suffixes)")
        ->check(CLI::ExistingFile);
    uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "master random seed");
    long workers = 0;
    auto* workers_opt = app.add_option("--workers", workers, "simulation worker threads");
    app.add_option("--out", opt.out_dir, "output directory (records.csv, summary.json, ...)");
    app.add_flag("--force", opt.force, "reuse a non-empty output directory");
    app.add_option("--set", opt.overrides, "override a config key, e.g. --set campaign.cycles=10")
        ->take_all();

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) opt.seed = seed;
    if (*workers_opt) opt.workers = workers;
    return simclock::cli::run(opt);
}
