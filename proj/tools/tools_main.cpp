#include <iostream>
#include <utility>

#include "CLI11.hpp"
#include "cylheat/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Transition densities of diagonal SDEs driven by cylindrical stable processes"};
    app.require_subcommand(1, 1);
    cylheat::RunOptions opt;
    const std::pair<const char*, const char*> stages[] = {
        {"density", "tabulate the one-dimensional stable densities"},
        {"parametrix", "build the parametrix tables and evaluate p^A at the probes"},
        {"verify", "run the estimate and identity checks on the tables"},
        {"simulate", "Euler Monte Carlo cross-checks"},
        {"report", "collect the stage records into summary files"},
    };
    for (const auto& [name, help] : stages) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "YAML run configuration")->required();
        sub->add_option("--out", opt.out_dir, "output directory (overrides CYLHEAT_OUT_DIR and the config)");
        sub->add_option("--threads", opt.threads, "thread cap")->check(CLI::PositiveNumber);
        sub->add_flag("--refine", opt.refine, "also build the refined table for stability deltas");
        sub->callback([&opt, name] { opt.command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cylheat::kExitConfigError;
    }
    return cylheat::run(opt, std::cerr);
}
