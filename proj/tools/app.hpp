#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "purifylab/cli.hpp"
#include "purifylab/fixtures.hpp"

namespace purifylab::app {

/// Full command-line entry point; `out` receives tables when --out is absent.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Purification-error experiments on random quantum channels", "purifylab"};
    app.set_version_flag("--version", std::string(cli::kVersion));
    app.set_config("--config", "", "flat key=value file supplying defaults; flags override");

    cli::RunConfig cfg;
    std::string de_text = "1";
    std::string strategies_text;
    std::string k_text;
    std::size_t di = 2, d_o = 2;
    std::uint64_t seed = 1;

    app.add_option("command", cfg.command, "validate | sweep | spectrum | tomo-scaling | fixtures")
        ->required()
        ->check(CLI::IsMember({"validate", "sweep", "spectrum", "tomo-scaling", "fixtures"}));
    app.add_option("path", cfg.fixtures_path, "fixture file for the fixtures command");
    app.add_option("--di", di, "input dimension d_I")->check(CLI::PositiveNumber);
    app.add_option("--do", d_o, "output dimension d_O")->check(CLI::PositiveNumber);
    app.add_option("--de", de_text, "environment dimension d_E or range a..b");
    app.add_option("--n", cfg.n_samples, "Monte Carlo samples (draws for spectrum)");
    auto* seed_opt = app.add_option("--seed", seed, "64-bit seed; falls back to PURIFYLAB_SEED");
    app.add_option("--out", cfg.output, "output file (default stdout)");
    app.add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--strategies", strategies_text, "comma-separated strategies");
    app.add_option("--workers", cfg.workers, "parallel workers")->check(CLI::PositiveNumber);
    app.add_option("--check", cfg.checks, "validate checks to run")->delimiter(',');
    app.add_option("--bins", cfg.bins, "histogram bins for spectrum");
    app.add_option("--k", k_text, "comma-separated copy budgets for tomo-scaling");
    app.add_flag("--plot", cfg.plot, "also write an SVG line chart (sweep)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? cli::kExitOk : cli::kExitUsage;
    }

    try {
        if (seed_opt->count() == 0) {
            if (const char* env = std::getenv("PURIFYLAB_SEED")) {
                seed = std::stoull(env);
            }
        }
        cfg.spec = {di, d_o, 1, seed};
        cfg.de = cli::parse_de_range(de_text);
        cfg.spec.d_env = cfg.de.lo;
        if (!strategies_text.empty()) cfg.strategies = cli::split_list(strategies_text);
        if (!k_text.empty()) cfg.ks = cli::parse_k_list(k_text);
        if (cfg.command == "sweep" || cfg.command == "validate") cfg.spec.validate();

        std::ofstream file;
        if (!cfg.output.empty()) {
            file.open(cfg.output);
            if (!file) {
                err << "error: cannot write " << cfg.output << "\n";
                return cli::kExitUsage;
            }
        }
        std::ostream& sink = cfg.output.empty() ? out : file;

        if (cfg.command == "validate") return cli::cmd_validate(cfg, sink);
        if (cfg.command == "spectrum") return cli::cmd_spectrum(cfg, sink);
        if (cfg.command == "tomo-scaling") return cli::cmd_tomo_scaling(cfg, sink);
        if (cfg.command == "fixtures") {
            if (cfg.fixtures_path.empty()) {
                err << "error: fixtures needs a path\n";
                return cli::kExitUsage;
            }
            return run_fixtures(cfg.fixtures_path, sink);
        }
        if (cfg.plot) {
            const std::string svg_path = (cfg.output.empty() ? std::string("purifylab_sweep") : cfg.output) + ".svg";
            std::ofstream svg(svg_path);
            if (!svg) {
                err << "error: cannot write " << svg_path << "\n";
                return cli::kExitUsage;
            }
            return cli::cmd_sweep(cfg, sink, &svg);
        }
        return cli::cmd_sweep(cfg, sink);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return cli::kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: bad PURIFYLAB_SEED\n";
        return cli::kExitUsage;
    } catch (const std::out_of_range& e) {
        err << "error: bad PURIFYLAB_SEED\n";
        return cli::kExitUsage;
    }
}

} // namespace purifylab::app
