#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "floodda/errors.hpp"
#include "floodda/osse.hpp"

using namespace floodda;

namespace {

const Catchment& desk() {
    static const Catchment c = generate_synthetic_catchment(CatchmentConfig::desk_default());
    return c;
}

ObsPlan plan_for(const TruthScenario& sc) {
    ObsPlan p;
    p.wsr_times = sc.s1_times;
    return p;
}

}  // namespace

TEST_CASE("deltaH truth: negative-cosine pulses plus the recession drawdown") {
    const auto sc = TruthScenario::desk_default(desk());
    const auto centres = sc.pulse_centres();
    REQUIRE(centres.size() == 3);
    CHECK(centres[0] == doctest::Approx(hours(71.333333333)));
    auto one = sc;
    one.pulsed_groups = 1;
    CHECK(one.deltaH(centres[0])[0] == doctest::Approx(-0.15));
    CHECK(one.deltaH(centres[0] + sc.pulse_half_width * 0.5)[2] == doctest::Approx(-0.075));
    CHECK(one.deltaH(centres[0] + sc.pulse_half_width)[1] == doctest::Approx(0.0));
    CHECK(one.deltaH(centres[0] - sc.pulse_half_width - 1.0)[0] == 0.0);
    // Overlapping neighbours add.
    CHECK(sc.deltaH(centres[0])[0] < one.deltaH(centres[0])[0]);
    for (double t = 0.0; t < hours(150.0); t += 600.0) CHECK(sc.deltaH(t)[3] <= 0.0);
    CHECK(sc.deltaH(hours(20.0))[4] == 0.0);
    CHECK(sc.deltaH(hours(130.0))[1] == doctest::Approx(-0.18));
    // Third group centre lies after the recession start: contributions add.
    CHECK(sc.deltaH(centres[2])[0] == doctest::Approx(-0.33));
}

TEST_CASE("corrections skip zero values and follow the cadence") {
    const auto sc = TruthScenario::desk_default(desk());
    for (const auto& cr : sc.corrections()) {
        CHECK(std::fmod(cr.time, sc.correction_interval) == 0.0);
        CHECK(cr.deltaH[0] != 0.0);
    }
    CHECK(TruthScenario::calibrated(desk()).corrections().empty());
}

TEST_CASE("scenario validation") {
    auto sc = TruthScenario::desk_default(desk());
    CHECK_NOTHROW(sc.validate());
    auto bad = sc;
    bad.s1_groups = {3, 3, 2};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = sc;
    bad.recession_offset = 0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = sc;
    bad.knots[1].time = bad.knots[0].time;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = sc;
    bad.s1_times[0] = hours(200.0);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("observation plan cadence") {
    ObsPlan p;
    const auto g = p.gauge_times();
    CHECK(g.size() == 144);
    CHECK(g.front() == hours(1.0));
    CHECK(g.back() == hours(144.0));
    p.wsr_times = {hours(1.0), hours(69.5)};
    CHECK(p.all_times().size() == 145);
}

TEST_CASE("calibrated scenario reproduces the free run bit-exactly") {
    const auto& c = desk();
    const auto cal = TruthScenario::calibrated(c);
    const auto plan = plan_for(cal);
    const auto truth = run_truth(c, cal, plan);
    const auto fr = simulate_event(c, ParameterSchedule(EffectiveParameters::calibrated(c)), {}, event_request(cal, plan));
    CHECK(truth.run.trajectory.levels == fr.trajectory.levels);
    CHECK(truth.run.trajectory.wsr == fr.trajectory.wsr);
    CHECK(truth.run.restart == fr.restart);
    CHECK(truth.rasters.size() == 9);
}

TEST_CASE("recession drawdown never increases WSR at recession overpasses") {
    const auto& c = desk();
    auto with = TruthScenario::desk_default(c);
    with.pulse_amplitude = 0.0;
    auto without = with;
    without.recession_offset = 0.0;
    const auto plan = plan_for(with);
    const auto a = run_truth(c, with, plan);
    const auto b = run_truth(c, without, plan);
    bool any_recession = false;
    for (double t : with.s1_times) {
        if (t < with.recession_start) continue;
        any_recession = true;
        const auto ka = a.run.trajectory.find_time(t);
        const auto kb = b.run.trajectory.find_time(t);
        REQUIRE(ka);
        REQUIRE(kb);
        for (int z = 0; z < kFloodplainZones; ++z) CHECK(a.run.trajectory.wsr[*ka][z] <= b.run.trajectory.wsr[*kb][z]);
    }
    CHECK(any_recession);
}

TEST_CASE("synthetic observations") {
    Trajectory t;
    t.station_names = {"upstream", "middle", "downstream", "floodplain"};
    ObsPlan plan;
    plan.tf = hours(3.0);
    plan.wsr_times = {hours(2.0)};
    for (int h = 0; h <= 3; ++h) {
        t.times.push_back(hours(h));
        t.levels.push_back({2.0, 3.0, 4.0, 5.0});
        t.wsr.push_back({1.0, 0.0, 0.5, 0.25, 1.0});
    }
    SUBCASE("noiseless twin equals truth") {
        plan.tau = 0.0;
        plan.wsr_sigma = 0.0;
        const auto obs = synthesize_observations(t, plan, 1);
        CHECK(obs.size() == 3 * 3 + 5);
        for (const auto& o : obs) {
            const auto k = *t.find_time(o.time);
            if (o.kind == ObsKind::gauge) {
                const auto s = std::find(t.station_names.begin(), t.station_names.end(), o.target);
                CHECK(o.value == t.levels[k][static_cast<std::size_t>(s - t.station_names.begin())]);
            } else
                CHECK(o.value == t.wsr[k][zone_index_from_target(o.target)]);
        }
    }
    SUBCASE("error model and clipping") {
        const auto obs = synthesize_observations(t, plan, 2);
        for (const auto& o : obs) {
            if (o.kind == ObsKind::gauge) {
                const auto k = *t.find_time(o.time);
                const auto st = std::find(t.station_names.begin(), t.station_names.end(), o.target);
                CHECK(o.sigma == doctest::Approx(0.15 * t.levels[k][static_cast<std::size_t>(st - t.station_names.begin())]));
            } else {
                CHECK(o.value <= 1.0);
                CHECK(o.value >= 0.0);
                CHECK(o.sigma == 0.1);
            }
        }
        CHECK(synthesize_observations(t, plan, 2) == obs);
        CHECK(synthesize_observations(t, plan, 3) != obs);
    }
    SUBCASE("gauge sigma for a 2.0 m truth with tau = 15 %") {
        const auto obs = synthesize_observations(t, plan, 1);
        REQUIRE(obs[0].target == "upstream");
        CHECK(obs[0].sigma == doctest::Approx(0.30));
    }
    SUBCASE("missing plan instants are alignment errors") {
        plan.tf = hours(5.0);
        CHECK_THROWS_AS(synthesize_observations(t, plan, 1), AlignmentError);
        plan.tf = hours(3.0);
        plan.gauge_stations = {"nowhere"};
        CHECK_THROWS_AS(synthesize_observations(t, plan, 1), AlignmentError);
    }
}

TEST_CASE("extent masks round-trip through ASCII grids") {
    const auto& c = desk();
    std::vector<std::uint8_t> m(c.grid.size(), 0);
    for (std::size_t k = 0; k < m.size(); k += 3)
        if (c.grid.active(k)) m[k] = 1;
    CHECK(mask_from_ascii(c.grid, mask_to_ascii(c.grid, m)) == m);
}
