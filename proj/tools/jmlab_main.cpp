#include "jmlab/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace jmlab;

int main(int argc, char** argv) {
    CLI::App app{"jmlab: joint position-momentum measurement error lab"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_flag, out_dir;
    std::uint64_t seed = 0;
    int dims = 0;
    std::string backend;
    app.add_option("--config", config_flag, "scenario config file");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "random seed (u64)");
    auto* dims_opt = app.add_option("--dims", dims, "Fock truncation for dense checks")->check(CLI::Range(4, 64));
    app.add_option("--backend", backend, "fock, gaussian or both")->check(CLI::IsMember({"fock", "gaussian", "both"}));

    std::string config_pos;
    auto* verify = app.add_subcommand("verify-commutators", "commutator identities on the truncated space");
    auto* report = app.add_subcommand("report", "error values, defects and inequality margins");
    auto* sweep = app.add_subcommand("sweep", "report over the [sweep] values");
    auto* counter = app.add_subcommand("counterexample", "swap/rotation counter-example reproduction");
    auto* self = app.add_subcommand("selftest", "invariant suites");
    for (auto* s : {verify, report, sweep}) s->add_option("config", config_pos, "scenario config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        const std::string path = config_pos.empty() ? config_flag : config_pos;
        const bool needs_config = !counter->parsed() && !self->parsed();
        if (needs_config && path.empty()) throw ConfigError("a config file is required (positional or --config)");
        ScenarioConfig cfg = path.empty() ? ScenarioConfig{} : load_config(path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (*seed_opt) cfg.optimizer.seed = seed;
        if (*dims_opt) cfg.fock.dims = dims;
        if (!backend.empty()) cfg.backend = parse_backend(backend);

        if (verify->parsed()) return run_verify_commutators(cfg, std::cout);
        if (report->parsed()) return run_report(cfg, std::cout);
        if (sweep->parsed()) return run_sweep(cfg, std::cout);
        if (counter->parsed()) return run_counterexample(cfg, std::cout);
        return run_selftest(cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return exit_io;
    } catch (const NotHermitian& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    }
}
