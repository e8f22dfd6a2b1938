// Command-line entry point: chaosmom <norm|envelope|simulate|verify> --config PATH [overrides]
//
// Exit status: 0 when every asserted row passed, 1 when some row failed,
// 2 on configuration or module errors.

#include "chaosmom/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"Moment and tail bounds for nonnegative chaoses: norms, envelopes, simulation reports"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<std::string> out_dir;
    std::optional<int> threads;

    for (const char* name : {"norm", "envelope", "simulate", "verify"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the top-level seed");
        sub->add_option("--samples", samples, "Override the Monte Carlo sample count");
        sub->add_option("--out", out_dir, "Override the output directory");
        sub->add_option("--threads", threads, "Sampling worker threads")->check(CLI::Range(1, 1024));
    }
    app.get_subcommand("norm")->description("Compute the chaos norm for every p in the grid");
    app.get_subcommand("envelope")->description("Build factor laws and audit the envelope sandwich");
    app.get_subcommand("simulate")->description("Sandwich, tail, decoupling and factorization reports");
    app.get_subcommand("verify")->description("Growth audit, norms, envelopes and every simulation report");

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    std::string where;
    try {
        auto cfg = chaosmom::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (samples) {
            if (*samples < 1000) throw chaosmom::ConfigInvalid("field 'samples': must be >= 1000");
            cfg.samples = *samples;
        }
        if (out_dir) cfg.output_dir = *out_dir;
        if (threads) cfg.threads = *threads;

        std::cout << command << " " << cfg.experiment << " (seed " << cfg.seed << ", " << cfg.samples
                  << " samples) -> " << cfg.output_dir << '\n';
        chaosmom::Experiment exp(cfg, std::cout);
        try {
            auto outcome = exp.run(command);
            std::cout << (outcome.passed ? "PASS" : "FAIL") << '\n';
            return outcome.passed ? 0 : 1;
        } catch (...) {
            where = exp.context().where();
            throw;
        }
    } catch (const chaosmom::error& e) {
        std::cerr << "error";
        if (!where.empty()) std::cerr << " in " << where;
        std::cerr << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
