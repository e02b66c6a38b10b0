// Command-line front end: one subcommand per experiment.
#include "martspline/experiments.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"martspline: spline projections on filtrations and their maximal operators"};
    app.require_subcommand(1);

    std::string config, out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> depth;
    bool quiet = false;
    for (const auto& name : martspline::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override the base seed");
        sub->add_option("--depth", depth, "override the depth");
        sub->add_flag("--quiet", quiet, "print nothing on success");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();

    try {
        auto cfg = martspline::load_json_file(config);
        martspline::RunOptions opts{seed, depth, quiet};
        auto t0 = std::chrono::steady_clock::now();
        auto result = martspline::run_experiment(name, cfg, opts);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto files = martspline::write_outputs(result, out, config, secs);
        if (!quiet || !result.pass()) {
            for (const auto& a : result.assertions)
                std::cout << (a.pass ? "ok   " : "FAIL ") << a.name << "  observed=" << martspline::fmt(a.observed)
                          << "  bound=" << martspline::fmt(a.bound) << "\n";
            std::cout << name << ": " << (result.pass() ? "pass" : "FAIL") << " (" << secs << " s), wrote "
                      << files[1].string() << "\n";
        }
        return result.pass() ? 0 : 1;
    } catch (const martspline::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
