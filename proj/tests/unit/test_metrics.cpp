#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "floodda/errors.hpp"
#include "floodda/metrics.hpp"

using namespace floodda;

namespace {

Grid line_grid(int n) {
    Grid g;
    g.nx = n;
    g.ny = 1;
    g.dx = g.dy = 10.0;
    g.z_b.assign(n, 0.0);
    g.kind.assign(n, CellKind::floodplain);
    return g;
}

Trajectory series(double offset) {
    Trajectory t;
    t.station_names = {"a", "b"};
    for (int k = 0; k < 4; ++k) {
        t.times.push_back(hours(k));
        t.levels.push_back({1.0 + k + offset, 2.0 - k});
        t.wsr.push_back({0.1 * k, 0, 0, 0, 0});
    }
    return t;
}

}  // namespace

TEST_CASE("RMSE oracles and properties") {
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse({1, 2, 3}, {1.5, 2.5, 3.5}) == doctest::Approx(0.5));
    CHECK(rmse({0, 0}, {3, 4}) == doctest::Approx(std::sqrt(12.5)));
    CHECK(rmse({0, 0}, {3, 4}) == doctest::Approx(3.5355).epsilon(1e-4));
    const std::vector<double> a{0.3, -1.2, 4.0, 2.2}, b{1.0, 0.1, 3.3, 2.0};
    CHECK(rmse(a, b) == rmse(b, a));
    const double bias = (std::accumulate(a.begin(), a.end(), 0.0) - std::accumulate(b.begin(), b.end(), 0.0)) / 4.0;
    CHECK(rmse(a, b) >= std::abs(bias));
    CHECK_THROWS_AS(rmse({}, {}), ConfigError);
    CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), AlignmentError);
    CHECK(rmse({0.0, 1.0}, {1, 2}, {0.0, 1.0}, {2, 3}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(rmse({0.0, 1.0}, {1, 2}, {0.0, 2.0}, {2, 3}), AlignmentError);
}

TEST_CASE("CSI oracles") {
    std::vector<std::uint8_t> truth(20, 0), pred(20, 0);
    for (int k = 0; k < 10; ++k) truth[k] = 1;
    for (int k = 2; k < 12; ++k) pred[k] = 1;  // 8 hits, 2 misses, 2 false alarms
    const auto r = csi(pred, truth);
    CHECK(r.counts.tp == 8);
    CHECK(r.counts.fn == 2);
    CHECK(r.counts.fp == 2);
    CHECK(r.counts.tn == 8);
    CHECK(r.csi == doctest::Approx(8.0 / 12.0));
    CHECK(csi(truth, truth).csi == 1.0);

    std::vector<std::uint8_t> disjoint(20, 0);
    for (int k = 10; k < 20; ++k) disjoint[k] = 1;
    CHECK(csi(disjoint, truth).csi == 0.0);

    const auto dry = csi(std::vector<std::uint8_t>(20, 0), std::vector<std::uint8_t>(20, 0));
    CHECK(dry.csi == 1.0);
    CHECK(dry.both_dry);
    CHECK_FALSE(r.both_dry);
    CHECK_THROWS_AS(csi(pred, std::vector<std::uint8_t>(19, 0)), AlignmentError);
}

TEST_CASE("CSI restricted to active cells, monotone, asymmetric in fp and fn") {
    std::vector<std::uint8_t> truth{1, 1, 1, 0, 0, 0}, pred{1, 0, 1, 1, 0, 1};
    std::vector<std::uint8_t> active{1, 1, 1, 1, 1, 0};
    const auto r = csi(pred, truth, active);
    CHECK(r.counts.total() == 5);
    CHECK(r.csi == doctest::Approx(2.0 / 4.0));
    // Adding a correctly predicted flooded cell never lowers CSI.
    auto t2 = truth, p2 = pred;
    t2[4] = p2[4] = 1;
    CHECK(csi(p2, t2, active).csi >= r.csi);
    // Swapping roles swaps fp and fn; the value only matches when they are equal.
    std::vector<std::uint8_t> x{1, 1, 1, 1, 0, 0}, y{1, 1, 0, 0, 0, 0};
    const auto xy = csi(x, y), yx = csi(y, x);
    CHECK(xy.counts.fp == yx.counts.fn);
    CHECK(xy.csi == yx.csi);
    std::vector<std::uint8_t> z{1, 1, 1, 0, 0, 0};
    CHECK(csi(z, y).csi != doctest::Approx(csi(x, y).csi));
}

TEST_CASE("self-comparison scores perfectly") {
    const auto truth = series(0.0);
    const auto grid = line_grid(6);
    std::vector<std::vector<std::uint8_t>> rasters{{1, 1, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}};
    ExperimentOutputs e{"self", truth, rasters, {}};
    const auto r = score_experiment(e, truth, rasters, {"a", "b"}, {hours(1), hours(2)}, 0.0, hours(3), grid);
    CHECK(r.station_rmse == std::vector<double>{0.0, 0.0});
    for (const auto& c : r.csi) CHECK(c.csi == 1.0);
    CHECK(r.csi[1].both_dry);
    CHECK(r.times.size() == 4);
    for (const auto& w : r.wsr_error)
        for (double x : w) CHECK(x == 0.0);
}

TEST_CASE("offset experiment: RMSE, row counts and comparison") {
    const auto truth = series(0.0);
    const auto grid = line_grid(6);
    std::vector<std::vector<std::uint8_t>> rasters{{1, 1, 0, 0, 0, 0}};
    ExperimentOutputs good{"good", series(0.1), rasters, {}};
    ExperimentOutputs bad{"bad", series(-0.4), {{1, 0, 0, 0, 0, 0}}, {}};
    const auto rg = score_experiment(good, truth, rasters, {"a", "b"}, {hours(1)}, 0.0, hours(3), grid);
    const auto rb = score_experiment(bad, truth, rasters, {"a", "b"}, {hours(1)}, 0.0, hours(3), grid);
    CHECK(rg.station_rmse[0] == doctest::Approx(0.1));
    CHECK(rb.station_rmse[0] == doctest::Approx(0.4));
    CHECK(rb.csi[0].csi == doctest::Approx(0.5));
    const auto t = compare({rb, rg});
    CHECK(t.experiments == std::vector<std::string>{"bad", "good"});
    CHECK(t.best[0] == 1);
    CHECK(t.rmse[0][0] == doctest::Approx(0.4));
    CHECK(t.csi[0][1] == 1.0);

    const auto dir = fixtures::scratch("metrics_io");
    const TimeAxis axis{0};
    write_comparison_csv(dir / "rmse.csv", dir / "csi.csv", t, axis);
    std::ifstream is(dir / "rmse.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "station,bad,good,best");
    CHECK(row.find("*") != std::string::npos);
    CHECK(row.substr(row.rfind(',') + 1) == "good");
    write_summary_json(dir / "summary.json", {rb, rg}, t, axis);
    std::ifstream js(dir / "summary.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j.contains("experiments"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("scoring rejects misaligned inputs") {
    const auto truth = series(0.0);
    const auto grid = line_grid(6);
    std::vector<std::vector<std::uint8_t>> rasters{{1, 1, 0, 0, 0, 0}};
    auto shifted = series(0.0);
    shifted.times[1] += 60.0;
    ExperimentOutputs e{"shifted", shifted, rasters, {}};
    CHECK_THROWS_AS(score_experiment(e, truth, rasters, {"a"}, {hours(1)}, 0.0, hours(3), grid), AlignmentError);
    ExperimentOutputs missing{"missing", truth, {}, {}};
    CHECK_THROWS_AS(score_experiment(missing, truth, rasters, {"a"}, {hours(1)}, 0.0, hours(3), grid), AlignmentError);
    ExperimentOutputs unknown{"unknown", truth, rasters, {}};
    CHECK_THROWS_AS(score_experiment(unknown, truth, rasters, {"zzz"}, {hours(1)}, 0.0, hours(3), grid),
                    AlignmentError);
}

TEST_CASE("control-space error uses the ensemble-mean analysis") {
    const auto truth = series(0.0);
    const auto grid = line_grid(6);
    std::vector<std::vector<std::uint8_t>> rasters{{1, 1, 0, 0, 0, 0}};
    CycleDiagnostics d;
    d.cycle = 1;
    d.mean_a[kIndexA] = 1.05;
    ControlVector tc;
    tc.x[kIndexA] = 1.1;
    ExperimentOutputs e{"da", truth, rasters, {d}};
    const auto r = score_experiment(e, truth, rasters, {"a"}, {hours(1)}, 0.0, hours(3), grid, {tc});
    REQUIRE(r.control_error.size() == 1);
    CHECK(r.control_error[0][kIndexA] == doctest::Approx(0.05));
    CHECK_THROWS_AS(score_experiment(e, truth, rasters, {"a"}, {hours(1)}, 0.0, hours(3), grid, {tc, tc}),
                    AlignmentError);
}
