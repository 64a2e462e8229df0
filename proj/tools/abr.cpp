// Command-line entry point: extract / evaluate / report.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "abr/config.hpp"
#include "abr/pipeline.hpp"
#include "abr/version.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> backend;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)")->required();
    cmd->add_option("--backend", o.backend, "Override the inference backend")
        ->check(CLI::IsMember({"interchange", "mock"}));
    cmd->add_option("--seed", o.seed, "Override the master seed");
    cmd->add_option("--jobs", o.jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
}

abr::RunConfig load(const Overrides& o) {
    auto cfg = abr::parse_config(o.config);
    if (o.backend) cfg.backend = abr::parse_backend(*o.backend);
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.jobs) cfg.jobs = *o.jobs;
    abr::validate_config(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normal/abnormal ABR report classification: CNN features + SVM, repeated stratified CV"};
    app.set_version_flag("--version", std::string(abr::version));
    app.require_subcommand(1);

    Overrides o;
    auto* extract = app.add_subcommand("extract", "Extract features for every model into the cache");
    auto* evaluate = app.add_subcommand("evaluate", "Repeated cross-validation, tables, ROC files, results.json");
    auto* report = app.add_subcommand("report", "Re-render tables and plots from results.json");
    for (auto* cmd : {extract, evaluate, report}) add_common_flags(cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : abr::exit_config_error;
    }

    try {
        const auto cfg = load(o);
        if (extract->parsed()) return abr::run_extract(cfg, std::cout);
        if (evaluate->parsed()) return abr::run_evaluate(cfg, std::cout);
        return abr::run_report(cfg, std::cout);
    } catch (const abr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return abr::exit_config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return abr::exit_partial_failure;
    }
}
