#include "floodda/osse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "floodda/errors.hpp"
#include "floodda/rng.hpp"

namespace floodda {

void TruthScenario::validate() const {
    if (knots.empty()) throw ConfigError("truth scenario: no parameter knots");
    for (std::size_t k = 0; k < knots.size(); ++k) {
        if (k > 0 && !(knots[k].time > knots[k - 1].time)) throw ConfigError("truth scenario: knot times must increase");
        for (double ks : knots[k].Ks)
            if (!(ks > 0.0) || !std::isfinite(ks)) throw ConfigError("truth scenario: Ks must be positive");
        if (!(knots[k].a > 0.0)) throw ConfigError("truth scenario: inflow multiplier must be positive");
    }
    if (!(tf > t0) || t_begin > t0) throw ConfigError("truth scenario: bad event span");
    for (double t : s1_times)
        if (t < t0 || t > tf) throw ConfigError("truth scenario: S1 time outside the event span");
    if (!std::is_sorted(s1_times.begin(), s1_times.end())) throw ConfigError("truth scenario: S1 times must be sorted");
    int grouped = 0;
    for (int g : s1_groups) {
        if (g < 1) throw ConfigError("truth scenario: S1 groups must be non-empty");
        grouped += g;
    }
    if (grouped != static_cast<int>(s1_times.size()))
        throw ConfigError("truth scenario: S1 group sizes do not add up to the number of overpasses");
    if (pulsed_groups < 0 || pulsed_groups > static_cast<int>(s1_groups.size()))
        throw ConfigError("truth scenario: more pulsed groups than groups");
    if (pulse_amplitude < 0.0) throw ConfigError("truth scenario: pulse amplitude must be >= 0 (pulses remove water)");
    if (recession_offset > 0.0) throw ConfigError("truth scenario: recession offset must be <= 0");
    if (!(pulse_half_width > 0.0) || !(correction_interval > 0.0))
        throw ConfigError("truth scenario: pulse width and correction interval must be positive");
}

ParameterSchedule TruthScenario::parameters() const {
    std::vector<double> times;
    std::vector<EffectiveParameters> values;
    for (const auto& k : knots) {
        times.push_back(k.time);
        EffectiveParameters p;
        p.Ks = k.Ks;
        p.inflow_multiplier = k.a;
        values.push_back(p);
    }
    if (times.size() == 1) return ParameterSchedule(values.front());
    return ParameterSchedule::piecewise_linear(std::move(times), std::move(values));
}

std::vector<double> TruthScenario::pulse_centres() const {
    std::vector<double> centres;
    std::size_t first = 0;
    for (int g = 0; g < pulsed_groups && g < static_cast<int>(s1_groups.size()); ++g) {
        const auto n = static_cast<std::size_t>(s1_groups[g]);
        double sum = 0.0;
        for (std::size_t q = first; q < first + n; ++q) sum += s1_times[q];
        centres.push_back(sum / static_cast<double>(n));
        first += n;
    }
    return centres;
}

std::array<double, kFloodplainZones> TruthScenario::deltaH(double t) const {
    double d = 0.0;
    // Full depth at the group centre, zero with zero slope at the window edges.
    for (double tc : pulse_centres())
        if (std::abs(t - tc) <= pulse_half_width)
            d -= pulse_amplitude * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - tc) / pulse_half_width));
    if (t >= recession_start) d += recession_offset;
    std::array<double, kFloodplainZones> out{};
    for (int z = 0; z < kFloodplainZones; ++z) out[z] = d * zone_weight[z];
    return out;
}

std::vector<TimedCorrection> TruthScenario::corrections() const {
    std::vector<TimedCorrection> out;
    const double first = std::floor(t_begin / correction_interval) + 1.0;
    for (double k = first;; k += 1.0) {
        const double t = k * correction_interval;
        if (t > tf) break;
        const auto d = deltaH(t);
        if (std::any_of(d.begin(), d.end(), [](double x) { return x != 0.0; })) out.push_back({t, d});
    }
    return out;
}

std::vector<FactorKnot> desk_truth_knots() {
    return {
        {hours(-6.0), {0.85, 0.82, 0.86, 0.80, 0.88, 0.84, 0.83}, 1.1},
        {hours(72.0), {0.88, 0.85, 0.81, 0.84, 0.86, 0.80, 0.86}, 1.1},
    };
}

std::vector<double> desk_s1_times() {
    return {hours(69), hours(71), hours(74), hours(79), hours(82), hours(86), hours(100), hours(110), hours(122)};
}

void TruthScenario::set_knots(const Catchment& c, const std::vector<FactorKnot>& fk) {
    knots.clear();
    for (const auto& f : fk) {
        ParameterKnot k{f.time, {}, f.a};
        for (int z = 0; z < kFrictionZones; ++z) k.Ks[z] = c.friction.calibrated_Ks[z] * f.Ks_factor[z];
        knots.push_back(k);
    }
}

TruthScenario TruthScenario::calibrated(const Catchment& c) {
    TruthScenario s;
    s.set_knots(c, {FactorKnot{s.t_begin}});
    s.pulse_amplitude = 0.0;
    s.recession_offset = 0.0;
    s.s1_times = desk_s1_times();
    return s;
}

TruthScenario TruthScenario::desk_default(const Catchment& c) {
    TruthScenario s;
    s.set_knots(c, desk_truth_knots());
    s.s1_times = desk_s1_times();
    return s;
}

void ObsPlan::validate() const {
    if (!(gauge_interval > 0.0)) throw ConfigError("observation plan: gauge interval must be positive");
    if (tau < 0.0 || wsr_sigma < 0.0 || !(gauge_sigma_min > 0.0))
        throw ConfigError("observation plan: error parameters must be non-negative (sigma floor positive)");
    if (!(tf > t0)) throw ConfigError("observation plan: empty span");
    for (double t : wsr_times)
        if (t < t0 || t > tf) throw ConfigError("observation plan: WSR time outside the event span");
}

std::vector<double> ObsPlan::gauge_times() const {
    std::vector<double> out;
    if (gauge_stations.empty()) return out;
    for (double k = 1.0;; k += 1.0) {
        const double t = t0 + k * gauge_interval;
        if (t > tf) break;
        out.push_back(t);
    }
    return out;
}

std::vector<double> ObsPlan::all_times() const {
    auto out = gauge_times();
    out.insert(out.end(), wsr_times.begin(), wsr_times.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

EventRun simulate_event(const Catchment& c, const ParameterSchedule& params, const std::vector<TimedCorrection>& corrections,
                        const EventRequest& req, const SolverSettings& settings) {
    if (!(req.tf > req.t_begin)) throw ConfigError("event run: empty span");
    const auto p0 = params.at(req.t_begin);
    const double q0 = hydrograph_at(c.bc, req.t_begin) * p0.inflow_multiplier;
    const HydraulicState initial = normal_depth_state(c, p0, q0, req.t_begin);

    RunRequest rr;
    rr.t_end = req.tf;
    rr.record_times = req.record_times;
    rr.snapshot_times = req.snapshot_times;
    rr.output_interval = req.output_interval;
    rr.h_wet = req.h_wet;
    rr.corrections = corrections;
    const bool keep_restart = req.restart_time > req.t_begin && req.restart_time <= req.tf;
    if (keep_restart) rr.checkpoint_times = {req.restart_time};
    auto res = run(initial, c, params, rr, settings);

    EventRun out;
    out.trajectory = std::move(res.trajectory);
    out.restart = keep_restart ? out.trajectory.checkpoints.front() : initial;
    out.ledger = res.ledger;
    out.steps = res.steps;
    return out;
}

EventRequest event_request(const TruthScenario& scenario, const ObsPlan& plan, double spinup) {
    EventRequest req;
    req.t_begin = scenario.t_begin;
    req.tf = scenario.tf;
    req.restart_time = scenario.t0 - spinup;
    req.record_times = plan.all_times();
    req.snapshot_times = scenario.s1_times;
    return req;
}

std::vector<std::uint8_t> wet_mask(const Grid& grid, const HydraulicState& s, double h_wet) {
    std::vector<std::uint8_t> m(grid.size(), 0);
    for (std::size_t c = 0; c < grid.size(); ++c) m[c] = grid.active(c) && s.h[c] > h_wet ? 1 : 0;
    return m;
}

TruthOutputs run_truth(const Catchment& c, const TruthScenario& scenario, const ObsPlan& plan,
                       const SolverSettings& settings) {
    scenario.validate();
    plan.validate();
    if (scenario.t_begin > plan.t0 || scenario.tf < plan.tf) throw ConfigError("truth scenario does not cover the plan span");
    TruthOutputs out;
    const auto req = event_request(scenario, plan);
    out.run = simulate_event(c, scenario.parameters(), scenario.corrections(), req, settings);
    out.s1_times = scenario.s1_times;
    for (const auto& s : out.run.trajectory.snapshots) out.rasters.push_back(wet_mask(c.grid, s, req.h_wet));
    return out;
}

ObservationSet synthesize_observations(const Trajectory& truth, const ObsPlan& plan, std::uint64_t seed) {
    plan.validate();
    std::vector<std::size_t> station_col;
    for (const auto& name : plan.gauge_stations) {
        auto it = std::find(truth.station_names.begin(), truth.station_names.end(), name);
        if (it == truth.station_names.end()) throw AlignmentError("truth run has no station '" + name + "'");
        station_col.push_back(static_cast<std::size_t>(it - truth.station_names.begin()));
    }
    auto at = [&](double t) {
        const auto k = truth.find_time(t);
        if (!k) throw AlignmentError("truth outputs lack plan time t=" + std::to_string(t) + " s");
        return *k;
    };

    auto rng = make_stream(seed, 0, 0, StreamPurpose::synthetic_observation);
    std::normal_distribution<double> normal(0.0, 1.0);
    ObservationSet obs;
    for (double t : plan.gauge_times()) {
        const auto k = at(t);
        for (std::size_t s = 0; s < station_col.size(); ++s) {
            const double level = truth.levels[k][station_col[s]];
            const double noise = plan.tau * std::abs(level) * normal(rng);
            Observation o;
            o.kind = ObsKind::gauge;
            o.target = plan.gauge_stations[s];
            o.time = t;
            o.value = level + noise;
            o.sigma = gauge_sigma(level, plan.tau, plan.gauge_sigma_min).sigma;  // the noise std actually used
            obs.push_back(std::move(o));
        }
    }
    for (double t : plan.wsr_times) {
        const auto k = at(t);
        for (int z = 0; z < kFloodplainZones; ++z) {
            Observation o;
            o.kind = ObsKind::wsr;
            o.target = zone_target(z);
            o.time = t;
            o.value = std::clamp(truth.wsr[k][z] + plan.wsr_sigma * normal(rng), 0.0, 1.0);
            o.sigma = std::max(plan.wsr_sigma, plan.gauge_sigma_min);
            obs.push_back(std::move(o));
        }
    }
    std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.time < b.time; });
    return obs;
}

AsciiGrid mask_to_ascii(const Grid& grid, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != grid.size()) throw IoError("raster size does not match grid");
    std::vector<double> f(mask.begin(), mask.end());
    return to_ascii_grid(grid, f);
}

std::vector<std::uint8_t> mask_from_ascii(const Grid& grid, const AsciiGrid& ascii) {
    const auto f = from_ascii_grid(grid, ascii);
    std::vector<std::uint8_t> m(f.size(), 0);
    for (std::size_t c = 0; c < f.size(); ++c) m[c] = grid.active(c) && f[c] == 1.0 ? 1 : 0;
    return m;
}

}  // namespace floodda
