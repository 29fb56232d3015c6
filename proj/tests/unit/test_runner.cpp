#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "floodda/errors.hpp"
#include "floodda/runner.hpp"

using namespace floodda;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Two 6 h cycles over a 12 h event with three overpasses: seconds, not minutes.
SuiteConfig short_config() {
    auto cfg = SuiteConfig::desk_default();
    cfg.filter.schedule.tf = hours(12.0);
    cfg.scenario.s1_times = {hours(4.0), hours(8.0), hours(10.0)};
    cfg.scenario.s1_groups = {1, 1, 1};
    cfg.scenario.pulsed_groups = 2;
    cfg.scenario.recession_start = hours(9.0);
    cfg.scenario.peak_s1_index = 1;
    cfg.plan.tf = cfg.filter.schedule.tf;
    cfg.plan.wsr_times = cfg.scenario.s1_times;
    for (auto& e : cfg.experiments)
        if (e.mode == ExperimentMode::assimilation) e.n_members = 4;
    cfg.filter.n_members = 4;
    return cfg;
}

}  // namespace

TEST_CASE("empty config is the desk default") {
    const auto a = parse_config("");
    const auto b = SuiteConfig::desk_default();
    CHECK(config_hash(a) == config_hash(b));
    CHECK(a.experiments.size() == 4);
    CHECK(a.plan.wsr_times == a.scenario.s1_times);
}

TEST_CASE("dump and parse round-trip") {
    auto cfg = SuiteConfig::desk_default();
    cfg.seed = 99;
    cfg.filter.lambda = 0.25;
    cfg.catchment.dyke_height = 4.5;
    cfg.scenario.recession_offset = -0.2;
    const auto text = dump_config(cfg);
    const auto back = parse_config(text);
    CHECK(dump_config(back) == text);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(back.seed == 99);
    CHECK(back.filter.lambda == 0.25);
    CHECK(config_hash(back) != config_hash(SuiteConfig::desk_default()));
}

TEST_CASE("config errors are ConfigError") {
    CHECK_THROWS_AS(parse_config("seeds: 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("filter:\n  lambdaa: 0.3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("filter:\n  lambda: [1, 2]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("filter: [\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("filter:\n  lambda: 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("filter:\n  shift_h: 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiments:\n  - {name: X, gauges: true, wsr: false, controls: [deltaH]}\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("experiments:\n  - {name: FR, n_members: 4}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiments:\n  - {name: IDA}\n  - {name: IDA}\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("experiments:\n  - {name: Y, controls: [Ks9]}\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/floodda.yaml"), ConfigError);
}

TEST_CASE("custom experiments parse from names and control groups") {
    const auto cfg = parse_config(
        "experiments:\n"
        "  - {name: FR}\n"
        "  - {name: KS1, gauges: true, controls: [Ks1], n_members: 8}\n"
        "  - {name: ALL, gauges: true, wsr: true, controls: [Ks, a, deltaH]}\n");
    const auto& ks1 = cfg.experiment("KS1");
    CHECK(ks1.n_members == 8);
    for (int j = 0; j < kControlSize; ++j) CHECK(ks1.active[j] == (j == 1));
    const auto& all = cfg.experiment("ALL");
    CHECK(all.controls_deltaH());
    CHECK(all.n_members == 32);
    CHECK_THROWS_AS(cfg.experiment("NOPE"), ConfigError);
}

TEST_CASE("standard experiment matrix") {
    const auto fr = ExperimentSpec::standard("FR");
    CHECK(fr.mode == ExperimentMode::free_run);
    CHECK(fr.n_members == 1);
    const auto ida = ExperimentSpec::standard("IDA");
    CHECK(ida.use_gauges);
    CHECK_FALSE(ida.use_wsr);
    CHECK_FALSE(ida.controls_deltaH());
    const auto iwda = ExperimentSpec::standard("IWDA");
    CHECK(iwda.use_wsr);
    CHECK_FALSE(iwda.controls_deltaH());
    const auto ihda = ExperimentSpec::standard("IHDA");
    CHECK(ihda.use_wsr);
    CHECK(ihda.controls_deltaH());
    CHECK_THROWS_AS(ExperimentSpec::standard("XYZ"), ConfigError);

    ObservationSet all{{ObsKind::gauge, "upstream", 3600.0, 3.0, 0.4}, {ObsKind::wsr, "1", 3600.0, 0.5, 0.1}};
    CHECK(select_observations(ida, all).size() == 1);
    CHECK(select_observations(ida, all)[0].kind == ObsKind::gauge);
    CHECK(select_observations(ihda, all).size() == 2);
}

TEST_CASE("manifest round-trip and output root") {
    const auto dir = fixtures::scratch("runner_manifest");
    auto m = start_manifest(SuiteConfig::desk_default(), "IDA");
    m.outputs = {"a.csv", "b/"};
    finish_manifest(m, "complete");
    write_manifest(dir / "manifest.json", m);
    const auto back = read_manifest(dir / "manifest.json");
    CHECK(back.experiment == "IDA");
    CHECK(back.status == "complete");
    CHECK(back.outputs == m.outputs);
    CHECK(back.config_hash == m.config_hash);
    CHECK(back.seed == m.seed);
    CHECK(back.code_version == code_version());

    ::setenv("FLOODDA_OUT", dir.c_str(), 1);
    CHECK(default_output_root() == dir);
    ::unsetenv("FLOODDA_OUT");
    CHECK(default_output_root() == fs::path("floodda-out"));
    fs::remove_all(dir);
}

TEST_CASE("assimilation runs restart from the free run's spin-up state") {
    const auto cfg = SuiteConfig::desk_default();
    const auto c = build_catchment(cfg);
    auto sc = cfg.scenario.build(c, cfg.filter.schedule.t0, cfg.filter.schedule.tf);
    auto req = event_request(sc, cfg.plan, cfg.filter.schedule.spinup);
    const auto fr = simulate_event(c, ParameterSchedule(EffectiveParameters::calibrated(c)), {}, req, cfg.solver);
    const auto r = calibrated_restart(cfg, c);
    CHECK(r.t == cfg.filter.schedule.t0 - cfg.filter.schedule.spinup);
    CHECK(r == fr.restart);
}

TEST_CASE("experiments write reproducible outputs") {
    const auto cfg = short_config();
    const auto c = build_catchment(cfg);
    const auto truth = run_truth_stage(cfg, c);
    const auto obs = synthesize_stage(cfg, truth.outputs.run.trajectory);
    const auto dir = fixtures::scratch("runner_exp");

    SUBCASE("free run") {
        const auto out = run_experiment(cfg, cfg.experiment("FR"), c, obs, dir / "FR");
        CHECK(out.cycles.empty());
        CHECK_FALSE(fs::exists(dir / "FR" / "cycles"));
        const auto m = read_manifest(dir / "FR" / "manifest.json");
        CHECK(m.status == "complete");
        for (const auto& f : m.outputs) CHECK(fs::exists(dir / "FR" / f));
        const auto stored = read_run_outputs(dir / "FR", c, cfg.scenario.s1_times, cfg.catchment.time_axis);
        CHECK(stored.trajectory.times == out.trajectory.times);
        CHECK(stored.trajectory.levels == out.trajectory.levels);
        CHECK(stored.rasters == out.rasters);
    }
    SUBCASE("gauge-only assimilation keeps deltaH at zero and reproduces bit-exactly") {
        const auto& spec = cfg.experiment("IDA");
        const auto a = run_experiment(cfg, spec, c, obs, dir / "A");
        const auto b = run_experiment(cfg, spec, c, obs, dir / "B");
        REQUIRE(a.cycles.size() == 2);
        for (const auto& d : a.cycles) {
            CHECK(d.n_wsr == 0);
            for (const auto* set : {&d.forecast, &d.analysis})
                for (const auto& v : *set)
                    for (int z = 0; z < kFloodplainZones; ++z) CHECK(v.deltaH(z) == 0.0);
        }
        const auto m = read_manifest(dir / "A" / "manifest.json");
        for (const auto& f : m.outputs) {
            CHECK(fs::exists(dir / "A" / f));
            CHECK(slurp(dir / "A" / f) == slurp(dir / "B" / f));
        }
        CHECK(fs::exists(dir / "A" / "cycles" / "1" / "member_3.ckpt"));
    }
    SUBCASE("assimilation without observations is a configuration error") {
        CHECK_THROWS_AS(run_experiment(cfg, cfg.experiment("IDA"), c, {}, dir / "X"), ConfigError);
        CHECK(read_manifest(dir / "X" / "manifest.json").status == "failed");
    }
    fs::remove_all(dir);
}

TEST_CASE("short suite produces every report and the comparison table") {
    const auto cfg = short_config();
    const auto dir = fixtures::scratch("runner_suite");
    const auto res = run_suite(cfg, dir);
    CHECK(res.reports.size() == 4);
    CHECK(res.table.experiments.size() == 4);
    CHECK(res.table.stations.size() == 4);
    CHECK(res.table.csi.size() == 3);
    for (const auto& r : res.reports) {
        CHECK(r.station_rmse.size() == 4);
        CHECK(r.csi.size() == 3);
    }
    CHECK(res.reports[0].station_rmse[0] > 0.0);
    for (const char* f : {"manifest.json", "config.yaml", "catchment/catchment.bin", "truth/station_levels.csv",
                          "observations/observations.csv", "IHDA/cycles.csv", "scores/comparison_rmse.csv",
                          "scores/comparison_csi.csv", "scores/summary.json"})
        CHECK_MESSAGE(fs::exists(dir / f), f);
    CHECK(read_manifest(dir / "manifest.json").status == "complete");
    CHECK(parse_config(slurp(dir / "config.yaml")).seed == cfg.seed);
    fs::remove_all(dir);
}
