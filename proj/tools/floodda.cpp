#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "floodda/errors.hpp"
#include "floodda/runner.hpp"

namespace fs = std::filesystem;
using namespace floodda;

namespace {

enum Exit { ok = 0, other = 1, config = 2, numerical = 3, alignment = 4 };

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

SuiteConfig effective_config(const Options& o) {
    auto cfg = o.config.empty() ? SuiteConfig::desk_default() : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    cfg.validate();
    return cfg;
}

fs::path output_root(const Options& o) { return o.out.empty() ? default_output_root() : fs::path(o.out); }

/// Stored catchment when present (so later stages use exactly what `generate` wrote), else regenerated.
Catchment stored_or_built(const SuiteConfig& cfg, const fs::path& root) {
    const auto p = root / "catchment" / "catchment.bin";
    return fs::exists(p) ? read_catchment(p) : build_catchment(cfg);
}

void warn_if_stale(const SuiteConfig& cfg, const fs::path& dir) {
    const auto p = dir / "manifest.json";
    if (!fs::exists(p)) return;
    const auto m = read_manifest(p);
    if (m.config_hash != config_hash(cfg))
        std::fprintf(stderr, "warning: %s was produced with a different configuration (%s, now %s)\n",
                     dir.string().c_str(), m.config_hash.c_str(), config_hash(cfg).c_str());
}

template <class Fn>
void with_manifest(const SuiteConfig& cfg, const fs::path& dir, const std::string& name, Fn&& fn) {
    fs::create_directories(dir);
    auto m = start_manifest(cfg, name);
    write_manifest(dir / "manifest.json", m);
    try {
        m.outputs = fn();
    } catch (...) {
        finish_manifest(m, "failed");
        write_manifest(dir / "manifest.json", m);
        throw;
    }
    finish_manifest(m, "complete");
    write_manifest(dir / "manifest.json", m);
}

TruthBundle stored_truth(const SuiteConfig& cfg, const Catchment& c, const fs::path& root) {
    warn_if_stale(cfg, root / "truth");
    TruthBundle t;
    t.scenario = cfg.scenario.build(c, cfg.filter.schedule.t0, cfg.filter.schedule.tf);
    auto stored = read_run_outputs(root / "truth", c, t.scenario.s1_times, cfg.catchment.time_axis);
    t.outputs.run.trajectory = std::move(stored.trajectory);
    t.outputs.rasters = std::move(stored.rasters);
    t.outputs.s1_times = t.scenario.s1_times;
    return t;
}

void cmd_generate(const Options& o) {
    const auto cfg = effective_config(o);
    const auto root = output_root(o);
    with_manifest(cfg, root / "catchment", "catchment", [&] {
        write_catchment_outputs(root / "catchment", build_catchment(cfg), cfg.catchment.time_axis);
        return std::vector<std::string>{"catchment.bin", "dem.asc", "friction_zones.asc", "floodplain_zones.asc",
                                        "hydrograph.csv"};
    });
    std::printf("catchment written to %s\n", (root / "catchment").string().c_str());
}

void cmd_truth(const Options& o) {
    const auto cfg = effective_config(o);
    const auto root = output_root(o);
    const auto c = stored_or_built(cfg, root);
    with_manifest(cfg, root / "truth", "truth", [&] {
        const auto t = run_truth_stage(cfg, c);
        write_truth_outputs(root / "truth", t, c, cfg.catchment.time_axis);
        return std::vector<std::string>{"station_levels.csv", "zone_wsr.csv", "s1_times.csv"};
    });
    std::printf("truth written to %s\n", (root / "truth").string().c_str());
}

void cmd_synthesize(const Options& o) {
    const auto cfg = effective_config(o);
    const auto root = output_root(o);
    const auto c = stored_or_built(cfg, root);
    const auto truth = stored_truth(cfg, c, root);
    with_manifest(cfg, root / "observations", "observations", [&] {
        const auto obs = synthesize_stage(cfg, truth.outputs.run.trajectory);
        write_observations_csv(root / "observations" / "observations.csv", obs, cfg.catchment.time_axis);
        return std::vector<std::string>{"observations.csv"};
    });
    std::printf("observations written to %s\n", (root / "observations").string().c_str());
}

void cmd_run(const Options& o, const std::string& name) {
    const auto cfg = effective_config(o);
    const auto root = output_root(o);
    const auto& spec = cfg.experiment(name);
    const auto c = stored_or_built(cfg, root);
    ObservationSet obs;
    if (spec.mode == ExperimentMode::assimilation) {
        warn_if_stale(cfg, root / "observations");
        obs = read_observations_csv(root / "observations" / "observations.csv", cfg.catchment.time_axis);
    }
    run_experiment(cfg, spec, c, obs, root / name);
    std::printf("%s written to %s\n", name.c_str(), (root / name).string().c_str());
}

void cmd_suite(const Options& o) {
    const auto cfg = effective_config(o);
    const auto root = output_root(o);
    const auto res = run_suite(cfg, root);
    const auto& t = res.table;
    std::printf("%-12s", "station");
    for (const auto& e : t.experiments) std::printf(" %10s", e.c_str());
    std::printf("\n");
    for (std::size_t s = 0; s < t.stations.size(); ++s) {
        std::printf("%-12s", t.stations[s].c_str());
        for (double v : t.rmse[s]) std::printf(" %10.4f", v);
        std::printf("\n");
    }
    std::printf("outputs in %s\n", root.string().c_str());
}

void cmd_score(const Options& o) {
    const auto cfg = effective_config(o);
    const auto root = output_root(o);
    const auto c = stored_or_built(cfg, root);
    const auto truth = stored_truth(cfg, c, root);
    std::vector<ExperimentOutputs> exps;
    for (const auto& spec : cfg.experiments) {
        const auto dir = root / spec.name;
        if (!fs::exists(dir / "manifest.json")) continue;
        if (read_manifest(dir / "manifest.json").status != "complete") {
            std::fprintf(stderr, "warning: skipping incomplete experiment %s\n", spec.name.c_str());
            continue;
        }
        warn_if_stale(cfg, dir);
        auto stored = read_run_outputs(dir, c, truth.scenario.s1_times, cfg.catchment.time_axis);
        ExperimentOutputs e{spec.name, std::move(stored.trajectory), std::move(stored.rasters), {}};
        if (fs::exists(dir / "cycles.csv")) e.cycles = read_cycle_diagnostics_csv(dir / "cycles.csv");
        exps.push_back(std::move(e));
    }
    if (exps.empty()) throw IoError("no completed experiments under " + root.string());
    score_stage(cfg, c, truth, exps, root / "scores");
    std::printf("scores written to %s\n", (root / "scores").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"floodda: shallow-water flood model with ensemble Kalman filter twin experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", code_version());
    Options o;
    app.add_option("-c,--config", o.config, "YAML configuration (defaults to the built-in desk catchment)")
        ->check(CLI::ExistingFile);
    app.add_option("-o,--out", o.out, "Output root (default: $FLOODDA_OUT or ./floodda-out)");
    app.add_option("-s,--seed", o.seed, "Master random seed");
    app.add_option("-j,--threads", o.threads, "Worker threads for ensemble members (0 = all cores)");

    auto* gen = app.add_subcommand("generate", "Write the synthetic catchment");
    auto* truth = app.add_subcommand("truth", "Run the truth scenario");
    auto* syn = app.add_subcommand("synthesize", "Draw synthetic observations from the truth run");
    auto* run = app.add_subcommand("run", "Run one experiment (FR, IDA, IWDA, IHDA or a configured name)");
    std::string experiment;
    run->add_option("experiment", experiment, "Experiment name")->required();
    auto* suite = app.add_subcommand("suite", "Run every stage and experiment, then score");
    auto* score = app.add_subcommand("score", "Score stored experiment outputs against the truth");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::config;
    }

    try {
        if (*gen) cmd_generate(o);
        if (*truth) cmd_truth(o);
        if (*syn) cmd_synthesize(o);
        if (*run) cmd_run(o, experiment);
        if (*suite) cmd_suite(o);
        if (*score) cmd_score(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return Exit::config;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return Exit::numerical;
    } catch (const AlignmentError& e) {
        std::fprintf(stderr, "alignment error: %s\n", e.what());
        return Exit::alignment;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return Exit::other;
    }
    return Exit::ok;
}
