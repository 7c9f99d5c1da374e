// blab: run, validate and list the bandit-competition experiments.
#include "blab/cli_experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Competing bandit platforms: experiment runner"};
    app.set_version_flag("--version", BLAB_VERSION);
    app.require_subcommand(1);

    std::string config;
    blab::RunOverrides ov;
    std::uint64_t seed = 0, reps = 0;
    unsigned threads = 0;
    std::string out_dir, format;

    auto* run = app.add_subcommand("run", "Run the experiment named in a config file");
    run->add_option("config", config, "YAML or JSON scenario")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides seeds.master)");
    auto* reps_opt = run->add_option("--reps", reps, "Replications (overrides seeds.replications)")
                         ->check(CLI::Range(std::uint64_t{2}, std::uint64_t{1} << 40));
    auto* threads_opt = run->add_option("--threads", threads, "Worker threads, 0 = all cores (env BLAB_THREADS)");
    auto* dir_opt = run->add_option("--out-dir", out_dir, "Output directory (overrides output.directory)");
    auto* fmt_opt = run->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json", "both"}));

    auto* validate = app.add_subcommand("validate", "Check a config file without running it");
    validate->add_option("config", config, "YAML or JSON scenario")->required()->check(CLI::ExistingFile);

    auto* policies = app.add_subcommand("policies", "List the built-in policy kinds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*policies) {
        for (const auto& p : blab::list_policies()) {
            std::cout << p.kind;
            if (!p.parameters.empty()) std::cout << " (" << p.parameters << ")";
            std::cout << ": " << p.description << '\n';
        }
        return 0;
    }
    if (*validate) return blab::validate_scenario(config, std::cout, std::cerr);

    if (*seed_opt) ov.seed = seed;
    if (*reps_opt) ov.replications = reps;
    if (*threads_opt) {
        ov.threads = threads;
    } else if (const char* env = std::getenv("BLAB_THREADS")) {
        try {
            ov.threads = static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            std::cerr << "error: BLAB_THREADS must be a non-negative integer\n";
            return 1;
        }
    }
    if (*dir_opt) ov.out_dir = out_dir;
    if (*fmt_opt) {
        ov.format = format == "csv" ? blab::OutputFormat::csv
                    : format == "json" ? blab::OutputFormat::json
                                       : blab::OutputFormat::both;
    }
    return blab::run_scenario(config, ov, std::cout, std::cerr);
}
