#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "floodda/errors.hpp"
#include "floodda/observe.hpp"

using namespace floodda;

namespace {

/// 2x2 floodplain grid forming a single zone of four equal cells.
Catchment four_cell_zone() {
    Catchment c;
    c.grid.nx = 2;
    c.grid.ny = 2;
    c.grid.dx = c.grid.dy = 10.0;
    c.grid.z_b = {10.0, 10.0, 10.0, 10.0};
    c.grid.kind.assign(4, CellKind::floodplain);
    c.friction.zone_id.assign(4, 0);
    c.zones.masks[0] = {0, 1, 2, 3};
    c.zones.zone_area[0] = 400.0;
    c.stations = {{"gauge", 0, StationRole::assimilated}};
    return c;
}

Trajectory one_instant(double level, double wsr1) {
    Trajectory t;
    t.station_names = {"gauge"};
    t.times = {3600.0};
    t.levels = {{level}};
    t.wsr = {{wsr1, 0, 0, 0, 0}};
    return t;
}

}  // namespace

TEST_CASE("gauge level oracles") {
    const auto c = four_cell_zone();
    auto s = dry_state(c.grid, 0.0);
    const auto dry = gauge_level(c.grid, s, c.stations[0]);
    CHECK(dry.level == 10.0);
    CHECK(dry.dry);
    s.h[0] = 2.0;
    const auto wet = gauge_level(c.grid, s, c.stations[0]);
    CHECK(wet.level == 12.0);
    CHECK_FALSE(wet.dry);
}

TEST_CASE("wet surface ratio oracles") {
    const auto c = four_cell_zone();
    auto s = dry_state(c.grid, 0.0);
    CHECK(wet_surface_ratio(c.grid, s, c.zones, 0) == 0.0);
    s.h[2] = 0.3;
    CHECK(wet_surface_ratio(c.grid, s, c.zones, 0) == doctest::Approx(0.25));
    s.h[1] = 0.05;  // at the threshold: not wet
    CHECK(wet_surface_ratio(c.grid, s, c.zones, 0) == doctest::Approx(0.25));
    std::fill(s.h.begin(), s.h.end(), 1.0);
    CHECK(wet_surface_ratio(c.grid, s, c.zones, 0) == 1.0);
    CHECK_THROWS_AS(wet_surface_ratio(c.grid, s, c.zones, 3), ConfigError);
}

TEST_CASE("model equivalents apply the bias table") {
    const auto traj = one_instant(12.0, 0.4);
    ObservationSet obs{{ObsKind::gauge, "gauge", 3600.0, 12.1, 0.3}, {ObsKind::wsr, "1", 3600.0, 0.5, 0.1}};
    BiasTable none;
    const auto raw = model_equivalents(traj, obs, none);
    CHECK(raw[0] == 12.0);
    CHECK(raw[1] == 0.4);
    BiasTable b;
    b.set(ObsKind::gauge, "gauge", 0.05);
    CHECK(model_equivalents(traj, obs, b)[0] == doctest::Approx(11.95));
    CHECK(model_equivalents(traj, obs, b)[1] == 0.4);
    CHECK(model_equivalents(traj, {}, b).empty());
    ObservationSet late{{ObsKind::gauge, "gauge", 7200.0, 12.1, 0.3}};
    CHECK_THROWS_AS(model_equivalents(traj, late, none), AlignmentError);
    ObservationSet unknown{{ObsKind::gauge, "nowhere", 3600.0, 12.1, 0.3}};
    CHECK_THROWS_AS(model_equivalents(traj, unknown, none), AlignmentError);
}

TEST_CASE("bias tables add entry-wise") {
    BiasTable a, b;
    a.set(ObsKind::gauge, "x", 0.1);
    b.set(ObsKind::gauge, "x", 0.2);
    b.set(ObsKind::wsr, "2", -0.05);
    const auto s = a + b;
    CHECK(s.get(ObsKind::gauge, "x") == doctest::Approx(0.3));
    CHECK(s.get(ObsKind::wsr, "2") == doctest::Approx(-0.05));
    CHECK(s.get(ObsKind::wsr, "1") == 0.0);
}

TEST_CASE("WSR sigma schedule oracles") {
    CHECK(wsr_sigma(0.0, 0.0, hours(18.0)) == doctest::Approx(0.2));
    CHECK(wsr_sigma(hours(18.0), 0.0, hours(18.0)) == doctest::Approx(0.1));
    CHECK(wsr_sigma(hours(9.0), 0.0, hours(18.0)) == doctest::Approx(0.15));
    CHECK_THROWS_AS(wsr_sigma(hours(19.0), 0.0, hours(18.0)), AlignmentError);
    CHECK_THROWS_AS(wsr_sigma(0.0, 1.0, 1.0), ConfigError);
}

TEST_CASE("gauge sigma oracles") {
    CHECK(gauge_sigma(2.0).sigma == doctest::Approx(0.30));
    CHECK_FALSE(gauge_sigma(2.0).floored);
    const auto f = gauge_sigma(1.0, 0.0);
    CHECK(f.sigma == 0.01);
    CHECK(f.floored);
}

TEST_CASE("observation validation") {
    CHECK_NOTHROW(validate_observation({ObsKind::wsr, "5", 0.0, 1.0, 0.1}));
    CHECK_THROWS_AS(validate_observation({ObsKind::wsr, "1", 0.0, 1.2, 0.1}), ConfigError);
    CHECK_THROWS_AS(validate_observation({ObsKind::wsr, "6", 0.0, 0.5, 0.1}), ConfigError);
    CHECK_THROWS_AS(validate_observation({ObsKind::gauge, "g", 0.0, 3.0, 0.0}), ConfigError);
    CHECK(zone_target(0) == "1");
    CHECK(zone_index_from_target("5") == 4);
    CHECK(obs_kind_from_string(to_string(ObsKind::wsr)) == ObsKind::wsr);
}

TEST_CASE("observation and series files round-trip") {
    const auto dir = fixtures::scratch("observe_io");
    const TimeAxis axis{parse_iso8601("2021-01-30T00:00:00Z")};
    ObservationSet obs{{ObsKind::gauge, "upstream", 3600.0, 3.8716530935696181, 0.58074796403544271},
                       {ObsKind::wsr, "3", hours(69.0), 0.123456789012345, 0.1}};
    write_observations_csv(dir / "obs.csv", obs, axis);
    CHECK(read_observations_csv(dir / "obs.csv", axis) == obs);
    CHECK(axis.iso(hours(69.0)) == "2021-02-01T21:00:00Z");
    CHECK(axis.from_iso("2021-02-01T21:00:00Z") == hours(69.0));
    std::filesystem::remove_all(dir);
}

TEST_CASE("constant state gives a constant recorded series") {
    const auto c = four_cell_zone();
    auto s = dry_state(c.grid, 0.0);
    s.h[0] = 1.5;
    std::vector<double> levels;
    for (int k = 0; k < 5; ++k) levels.push_back(gauge_level(c.grid, s, c.stations[0]).level);
    for (double l : levels) CHECK(l == 11.5);
}
