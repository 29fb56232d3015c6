#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "floodda/errors.hpp"
#include "floodda/swe.hpp"

using namespace floodda;

namespace {

HydraulicState lake(const Catchment& c, double eta) {
    auto s = dry_state(c.grid, 0.0);
    for (std::size_t k = 0; k < c.grid.size(); ++k) s.h[k] = std::max(0.0, eta - c.grid.z_b[k]);
    return s;
}

}  // namespace

TEST_CASE("stable_dt oracle and dry limit") {
    auto c = fixtures::closed_basin(10, 10, 25.0);
    std::fill(c.grid.z_b.begin(), c.grid.z_b.end(), 0.0);
    auto s = dry_state(c.grid, 0.0);
    SolverSettings st;
    CHECK(stable_dt(s, c, 0.5, st) == st.dt_max);
    std::fill(s.h.begin(), s.h.end(), 1.0);
    CHECK(stable_dt(s, c, 0.5, st) == doctest::Approx(0.5 * 25.0 / std::sqrt(9.81)).epsilon(1e-12));
    CHECK(stable_dt(s, c, 0.5, st) == doctest::Approx(3.99).epsilon(1e-3));
    CHECK_THROWS_AS(stable_dt(s, c, 1.5, st), ConfigError);
}

TEST_CASE("lake at rest stays at rest over 1000 steps") {
    const auto c = fixtures::closed_basin();
    // The surface cuts through the bumps, so the test also covers wet/dry fronts.
    auto s = lake(c, 0.3);
    const auto s0 = s;
    const auto p = EffectiveParameters::calibrated(c);
    for (int n = 0; n < 1000; ++n) s = step(s, c, p, 5.0);
    double dev = 0.0;
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        dev = std::max(dev, std::abs(s.h[k] - s0.h[k]));
        dev = std::max(dev, std::abs(s.u[k]) + std::abs(s.v[k]));
    }
    CHECK(dev <= 1e-10);
}

TEST_CASE("zero velocity produces no friction or wind source") {
    auto c = fixtures::closed_basin();
    std::fill(c.grid.z_b.begin(), c.grid.z_b.end(), 0.0);
    auto s = lake(c, 1.0);
    auto p = EffectiveParameters::calibrated(c);
    auto a = step(s, c, p, 5.0);
    p.Ks.fill(5.0);
    auto b = step(s, c, p, 5.0);
    CHECK(a == b);
    for (double u : a.u) CHECK(u == 0.0);
}

TEST_CASE("closed basin conserves volume") {
    const auto c = fixtures::closed_basin();
    auto s = lake(c, 0.3);
    for (std::size_t k = 0; k < c.grid.size(); ++k)
        if (c.grid.col(k) < 6 && s.h[k] > 0.0) s.h[k] += 0.5;  // sloshing wave with moving shorelines
    const double v0 = total_volume(c.grid, s);
    const auto p = EffectiveParameters::calibrated(c);
    SolverSettings st;
    for (int n = 0; n < 1000; ++n) s = step(s, c, p, stable_dt(s, c, st.cfl, st), st);
    CHECK(std::abs(total_volume(c.grid, s) - v0) / v0 <= 1e-8);
    for (double h : s.h) CHECK(h >= 0.0);
}

TEST_CASE("uniform channel flow follows Strickler") {
    const double S = 2e-4, Ks = 40.0, Q = 350.0, B = 100.0;
    const auto c = fixtures::uniform_channel(60, 25.0, B, S, Ks, Q);
    const auto p = EffectiveParameters::calibrated(c);
    RunRequest req;
    req.t_end = hours(12.0);
    const auto r = run(normal_depth_state(c, p, Q, 0.0), c, ParameterSchedule(p), req);
    for (int i : {20, 30, 40}) {
        const double h = r.final_state.h[static_cast<std::size_t>(i)];
        const double u = r.final_state.u[static_cast<std::size_t>(i)];
        const double strickler = Ks * std::pow(h, 2.0 / 3.0) * std::sqrt(S);
        CHECK(std::abs(u - strickler) / strickler <= 0.02);
    }
}

TEST_CASE("state correction oracles") {
    const auto c = generate_synthetic_catchment(CatchmentConfig::desk_default());
    auto s = dry_state(c.grid, 0.0);
    for (auto cell : c.zones.masks[0]) s.h[cell] = 0.5;
    for (auto cell : c.zones.masks[1]) s.h[cell] = 0.3;

    CHECK(apply_state_correction(s, c, {0, 0, 0, 0, 0}).state == s);

    const auto r = apply_state_correction(s, c, {-0.18, -1.0, 0, 0, 0});
    for (auto cell : c.zones.masks[0]) CHECK(r.state.h[cell] == doctest::Approx(0.32).epsilon(1e-12));
    for (auto cell : c.zones.masks[1]) CHECK(r.state.h[cell] == 0.0);
    CHECK(r.clamped_cells == c.zones.masks[1].size());
    // Dry cells stay dry under a positive shift.
    const auto up = apply_state_correction(s, c, {0, 0, 0.5, 0, 0});
    for (auto cell : c.zones.masks[2]) CHECK(up.state.h[cell] == 0.0);
    CHECK_THROWS_AS(apply_state_correction(s, c, {std::nan(""), 0, 0, 0, 0}), ConfigError);
}

TEST_CASE("run to its own start time is empty") {
    const auto c = fixtures::closed_basin();
    const auto s = lake(c, 0.3);
    RunRequest req;
    req.t_end = 0.0;
    req.checkpoint_times = {};
    const auto r = run(s, c, ParameterSchedule(EffectiveParameters::calibrated(c)), req);
    CHECK(r.trajectory.times.empty());
    CHECK(r.trajectory.checkpoints.empty());
    CHECK(r.final_state == s);
    CHECK(r.steps == 0);
}

TEST_CASE("runs are deterministic and restart exactly from checkpoints") {
    const auto c = generate_synthetic_catchment(CatchmentConfig::desk_default());
    const auto p = EffectiveParameters::calibrated(c);
    const auto s0 = normal_depth_state(c, p, hydrograph_at(c.bc, 0.0), 0.0);
    RunRequest full;
    full.t_end = hours(8.0);
    full.checkpoint_times = {hours(4.0)};
    const auto a = run(s0, c, ParameterSchedule(p), full);
    const auto b = run(s0, c, ParameterSchedule(p), full);
    CHECK(a.final_state == b.final_state);
    CHECK(a.trajectory.levels == b.trajectory.levels);

    const auto dir = fixtures::scratch("swe_ckpt");
    write_checkpoint(dir / "mid.ckpt", a.trajectory.checkpoints.at(0), c.grid);
    const auto mid = read_checkpoint(dir / "mid.ckpt", c.grid);
    CHECK(mid == a.trajectory.checkpoints.at(0));
    RunRequest rest;
    rest.t_end = hours(8.0);
    const auto c2 = run(mid, c, ParameterSchedule(p), rest);
    CHECK(c2.final_state == a.final_state);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dam break stays positive and mirror-symmetric") {
    auto c = fixtures::closed_basin(30, 12, 25.0);
    std::fill(c.grid.z_b.begin(), c.grid.z_b.end(), 0.0);
    auto s = dry_state(c.grid, 0.0);
    for (std::size_t k = 0; k < c.grid.size(); ++k)
        if (c.grid.col(k) < 10) s.h[k] = 2.0;
    const auto p = EffectiveParameters::calibrated(c);
    SolverSettings st;
    for (int n = 0; n < 300; ++n) s = step(s, c, p, stable_dt(s, c, st.cfl, st), st);
    for (int j = 0; j < c.grid.ny; ++j)
        for (int i = 0; i < c.grid.nx; ++i) {
            const auto k = c.grid.index(i, j);
            const auto m = c.grid.index(i, c.grid.ny - 1 - j);
            CHECK(s.h[k] >= 0.0);
            CHECK(s.h[k] == doctest::Approx(s.h[m]).epsilon(1e-12));
            CHECK(s.u[k] == doctest::Approx(s.u[m]).epsilon(1e-12));
            CHECK(s.v[k] == doctest::Approx(-s.v[m]).epsilon(1e-12).scale(1e-12));
        }
}

TEST_CASE("non-finite states raise NumericalError") {
    const auto c = fixtures::closed_basin();
    auto s = lake(c, 0.3);
    s.u[5] = std::numeric_limits<double>::infinity();
    s.h[5] = 1.0;
    CHECK_THROWS_AS(step(s, c, EffectiveParameters::calibrated(c), 5.0), NumericalError);
}

TEST_CASE("parameter schedule interpolates between knots") {
    EffectiveParameters a, b;
    a.Ks.fill(20.0);
    b.Ks.fill(40.0);
    a.inflow_multiplier = 1.0;
    b.inflow_multiplier = 1.2;
    const auto sch = ParameterSchedule::piecewise_linear({0.0, 10.0}, {a, b});
    CHECK(sch.at(5.0).Ks[3] == doctest::Approx(30.0));
    CHECK(sch.at(5.0).inflow_multiplier == doctest::Approx(1.1));
    CHECK(sch.at(-1.0).Ks[0] == 20.0);
    CHECK(sch.at(99.0).inflow_multiplier == 1.2);
}
