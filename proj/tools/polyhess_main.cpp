#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "polyhess/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"polyhess: spectral polyharmonic k-Hessian experiment runner"};
    std::string config_path;
    app.add_option("config", config_path, "JSON run configuration (one file per run)")
        ->required()
        ->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    try {
        const polyhess::cli::RunResult result = polyhess::cli::run_file(config_path);
        std::printf("output: %s\n", result.output_path.string().c_str());
        for (const auto& check : result.report.checks)
            std::printf("%-8s %-32s measured=%.6g threshold=%.6g\n", check.status.c_str(),
                        check.name.c_str(), check.measured, check.threshold);
        return result.exit_code;
    } catch (const polyhess::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
