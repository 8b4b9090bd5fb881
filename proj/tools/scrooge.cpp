#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scrooge/runner.hpp"
#include "scrooge/version.hpp"

namespace {

void add_common(CLI::App* cmd, scrooge::CommandOptions& opts, std::string& out_dir,
                std::string& seed) {
    cmd->add_option("-c,--config", opts.config_path, "configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", out_dir, "output directory (overrides [output] dir)");
    cmd->add_option("-w,--workers", opts.workers, "worker threads, 0 = machine parallelism")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed-override", seed, "replace the configured experiment seed");
}

void finish_common(scrooge::CommandOptions& opts, const std::string& out_dir,
                   const std::string& seed) {
    if (!out_dir.empty()) opts.out_override = out_dir;
    if (!seed.empty()) opts.seed_override = std::stoull(seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("RIS network simulator (") + scrooge::kVersionTag + ")"};
    app.require_subcommand(1);

    scrooge::CommandOptions opts;
    std::string out_dir, seed, state_file;
    long long entry_index = -1;

    CLI::App* compile = app.add_subcommand("compile", "compile a codebook from a config");
    add_common(compile, opts, out_dir, seed);

    CLI::App* run = app.add_subcommand("run", "run Monte Carlo experiments against a codebook");
    add_common(run, opts, out_dir, seed);
    run->add_option("-e,--experiment", opts.experiment, "alloc, ee, admission or all")
        ->check(CLI::IsMember({"alloc", "ee", "admission", "all"}));

    CLI::App* snrmap = app.add_subcommand("snrmap", "raster the SNR over a configured plane");
    add_common(snrmap, opts, out_dir, seed);
    snrmap->add_option("--entry", entry_index, "codebook entry index as the surface state");
    snrmap->add_option("--state", state_file, "ris-state file as the surface state");

    CLI11_PARSE(app, argc, argv);

    try {
        finish_common(opts, out_dir, seed);
        if (compile->parsed()) {
            scrooge::cmd_compile(opts, std::cout, std::cerr);
        } else if (run->parsed()) {
            scrooge::cmd_run(opts, std::cout, std::cerr);
        } else {
            if (entry_index >= 0) opts.entry_index = static_cast<std::size_t>(entry_index);
            if (!state_file.empty()) opts.state_path = state_file;
            scrooge::cmd_snrmap(opts, std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
