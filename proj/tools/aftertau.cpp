#include "aftertau/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace aftertau;
    CLI::App app{"After-tau numeraire portfolio experiments"};
    app.require_subcommand(1);
    std::string config;
    std::uint64_t seed = 0;
    long paths = 0;
    for (const char* name : {"simulate", "solve", "verify", "decompose", "existence"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "key = value config file")->required();
        sub->add_option("--seed", seed, "override run.seed");
        sub->add_option("--paths", paths, "override run.n_paths");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const std::string which = app.get_subcommands().front()->get_name();
    ExperimentConfig cfg;
    try {
        cfg = load_config(config);
        auto* sub = app.get_subcommand(which);
        if (sub->count("--seed")) cfg.seed = seed;
        if (sub->count("--paths")) {
            if (paths < 2) throw config_error(0, "--paths", "must be >= 2");
            cfg.n_paths = paths;
        }
    } catch (const config_error& e) {
        std::cerr << config << ":" << (e.line ? std::to_string(e.line) + ":" : "") << " "
                  << (e.field.empty() ? "" : e.field + ": ") << e.what() << "\n";
        return 2;
    }
    try {
        return run(parse_subcommand(which), cfg, std::cout);
    } catch (const std::exception& e) {
        std::cerr << which << ": " << e.what() << "\n";
        return 1;
    }
}
