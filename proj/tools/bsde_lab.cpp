// bsde_lab: config-driven front end for the BSDE library.
//
//   bsde_lab <command> --config run.json [--paths-file ens.bin] [--output-dir dir]
//
// Exit status: 0 success, 1 check or runtime failure, 2 usage or config error.

#include "bsde/commands.hpp"
#include "bsde/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <utility>

int main(int argc, char** argv)
{
    CLI::App app{"Monte Carlo lab for BSDEs with non-Lipschitz generators"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string paths_file;
    std::string output_dir;
    const std::pair<const char*, const char*> commands[] = {
        {"check", "hypothesis checks on the generator, modulus and envelope"},
        {"solve", "Picard regression solve"},
        {"oracle-compare", "solve and compare with the closed-form solution"},
        {"bihari", "iterate the Bihari recursion"},
        {"constants", "evaluate the a priori constants"},
        {"gen-paths", "write a Brownian ensemble file"},
        {"convergence-study", "oracle errors over an M x N grid"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "JSON run configuration")->required();
        sub->add_option("--paths-file", paths_file, "ensemble file to reuse (written by gen-paths)");
        sub->add_option("-o,--output-dir", output_dir, "overrides output_dir from the config");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? bsde::kExitOk : bsde::kExitUsage;
    }

    const auto cmd = bsde::parse_command(app.get_subcommands().front()->get_name());
    try {
        bsde::RunConfig cfg = bsde::load_config(config_path);
        if (!paths_file.empty()) {
            cfg.paths.paths_file = paths_file;
        }
        if (!output_dir.empty()) {
            cfg.output_dir = output_dir;
        }
        return bsde::run(*cmd, cfg, std::cout);
    } catch (const bsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bsde::kExitUsage;
    } catch (const bsde::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bsde::kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bsde::kExitFailure;
    }
}
