// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

// mforge: run, eval, serve and report subcommands.

#include <iostream>

#include "CLI11.hpp"
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mforge/commands.hpp"
#include "mforge/errors.hpp"

int main(int argc, char** argv) {
    using namespace mforge;
    CLI::App app{"Generate, score and refine visual metaphors"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::string config_file, dataset, out_dir, profile, listen, pairs, runs_file;
    int iterations = 0, parallelism = 0;
    std::uint64_t seed = 0;
    bool verbose = false;
    std::size_t short_max_words = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "TOML config file (or .json)");
        sub->add_option("--profile", profile, "generation profile name (turbo, quality, ...)");
        sub->add_option("--seed", seed, "seed applied to generation params and mock backends");
        sub->add_flag("--mock", cli.mock, "use deterministic mock backends");
        sub->add_flag("-v,--verbose", verbose, "debug logging");
    };

    auto* run = app.add_subcommand("run", "refine every metaphor in a dataset");
    common(run);
    run->add_option("--dataset", dataset, "plain-text or CSV metaphor file");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--iterations", iterations, "refinement iterations per metaphor")->check(CLI::PositiveNumber);
    run->add_option("--parallelism", parallelism, "metaphor runs in flight")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "score existing (metaphor, image) pairs");
    common(eval);
    eval->add_option("--pairs,--dataset", pairs, "JSONL pairs file")->required();

    auto* serve = app.add_subcommand("serve", "start the reward service");
    common(serve);
    serve->add_option("--listen", listen, "host:port");

    auto* report = app.add_subcommand("report", "summarize a runs.jsonl file");
    report->add_option("runs", runs_file, "runs.jsonl")->required();
    report->add_option("--config", config_file, "config file (reads report.short_max_words)");
    report->add_option("--short-max-words", short_max_words, "word count limit of the short bucket");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("mforge"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    if (!config_file.empty()) cli.config_file = config_file;
    if (!dataset.empty()) cli.dataset = dataset;
    if (!out_dir.empty()) cli.out_dir = out_dir;
    if (!profile.empty()) cli.profile = profile;
    if (!listen.empty()) cli.listen = listen;
    if (iterations > 0) cli.iterations = iterations;
    if (parallelism > 0) cli.parallelism = parallelism;
    for (auto* sub : {run, eval, serve})
        if (sub->count("--seed")) cli.seed = seed;

    try {
        RunConfig cfg = load_config(cli);
        if (*run) return cmd_run(cfg, std::cout);
        if (*eval) return cmd_eval(cfg, pairs, std::cout);
        if (*serve) return cmd_serve(cfg, process_env()("METAPHOR_FORGE_TOKEN"), std::cout);
        if (*report) return cmd_report(runs_file, short_max_words ? short_max_words : cfg.short_max_words, std::cout);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
