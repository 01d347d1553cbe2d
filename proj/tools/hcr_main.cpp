// Command-line front end. Talks to the library only through hcr.h.

#include "hcr/hcr.h"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

namespace {

struct Flags {
    std::string config;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> grid;
    std::optional<int> threads;
};

int report_failure(hcr_status st) {
    std::fprintf(stderr, "error: %s\n", hcr_last_error());
    return static_cast<int>(st);
}

int with_config(const Flags& f, hcr_status (*run)(const hcr_config*)) {
    if (f.config.empty()) {
        std::fprintf(stderr, "error: --config is required\n");
        return HCR_ERR_CONFIG;
    }
    hcr_config* cfg = nullptr;
    hcr_status st = hcr_config_load(f.config.c_str(), &cfg);
    if (st != HCR_OK) return report_failure(st);
    if (st == HCR_OK && f.seed) st = hcr_config_set_seed(cfg, *f.seed);
    if (st == HCR_OK && f.out) st = hcr_config_set_output_dir(cfg, f.out->c_str());
    if (st == HCR_OK && f.grid) st = hcr_config_set_grid(cfg, f.grid->c_str());
    if (st == HCR_OK && f.threads) st = hcr_config_set_threads(cfg, *f.threads);
    if (st == HCR_OK) st = run(cfg);
    hcr_config_free(cfg);
    return st == HCR_OK ? 0 : report_failure(st);
}

int run_report(const Flags& f, const std::string& positional) {
    std::string dir = positional;
    if (dir.empty() && f.out) dir = *f.out;
    if (dir.empty() && !f.config.empty()) {
        hcr_config* cfg = nullptr;
        const hcr_status st = hcr_config_load(f.config.c_str(), &cfg);
        if (st != HCR_OK) return report_failure(st);
        dir = hcr_config_output_dir(cfg);
        hcr_config_free(cfg);
    }
    if (dir.empty()) {
        std::fprintf(stderr, "error: pass the output directory (positional, --out or --config)\n");
        return HCR_ERR_CONFIG;
    }
    const hcr_status st = hcr_run_report(dir.c_str());
    return st == HCR_OK ? 0 : report_failure(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Horizon-constrained Rashomon sets for chaotic forecasting"};
    app.require_subcommand(1);
    Flags f;
    app.add_option("--config", f.config, "experiment config (JSON)");
    app.add_option("--seed", f.seed, "override master_seed");
    app.add_option("--out", f.out, "override output directory");
    app.add_option("--grid", f.grid, "grid preset")->check(CLI::IsMember({"desk", "full"}));
    app.add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "generate and save the trajectory");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
    auto* lyapunov = app.add_subcommand("lyapunov", "estimate the largest Lyapunov exponent");
    auto* select = app.add_subcommand("select", "rerun sets and selection on a trained pool");
    auto* report = app.add_subcommand("report", "emit figure-data CSVs from pipeline outputs");
    std::string report_dir;
    report->add_option("dir", report_dir, "pipeline output directory");
    for (auto* sub : {simulate, pipeline, lyapunov, select, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : HCR_ERR_CONFIG;
    }

    if (*simulate) return with_config(f, hcr_run_simulate);
    if (*pipeline) return with_config(f, hcr_run_pipeline);
    if (*lyapunov) return with_config(f, hcr_run_lyapunov);
    if (*select) return with_config(f, hcr_run_select);
    return run_report(f, report_dir);
}
