#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "floodda/catchment.hpp"
#include "floodda/esri_ascii.hpp"
#include "floodda/observe.hpp"
#include "floodda/swe.hpp"

namespace floodda {

/// Knot values of the true parameters, linearly interpolated in time.
struct ParameterKnot {
    double time = 0.0;
    std::array<double, kFrictionZones> Ks{};
    double a = 1.0;
};

/// Truth parameters as factors on the calibrated values.
struct FactorKnot {
    double time = 0.0;
    std::array<double, kFrictionZones> Ks_factor{1, 1, 1, 1, 1, 1, 1};
    double a = 1.0;
};

/// Default truth: Ks 12-20 % rougher than calibrated, 10 % more inflow.
std::vector<FactorKnot> desk_truth_knots();
/// Default S1 overpass instants: three groups around the main flood wave.
std::vector<double> desk_s1_times();

struct TruthScenario {
    std::vector<ParameterKnot> knots;
    std::vector<double> s1_times;              // satellite overpass instants (9 by default)
    std::vector<int> s1_groups{3, 3, 3};       // consecutive overpasses per group
    int pulsed_groups = 3;                     // groups that receive a negative-cosine pulse
    double pulse_amplitude = 0.15;             // [m], removed at the pulse centre
    double pulse_half_width = hours(12.0);
    double recession_start = hours(96.0);
    double recession_offset = -0.18;           // [m], held from recession_start onwards
    std::array<double, kFloodplainZones> zone_weight{1.0, 1.0, 1.0, 1.0, 1.0};
    double correction_interval = hours(6.0);   // deltaH(t) is applied on this cadence, anchored at t = 0
    double t_begin = hours(-6.0);              // cold start of every deterministic event run
    double t0 = 0.0;
    double tf = hours(144.0);

    void validate() const;
    ParameterSchedule parameters() const;
    /// Pulse centres: mean overpass time of each of the first `pulsed_groups` groups.
    std::vector<double> pulse_centres() const;
    std::array<double, kFloodplainZones> deltaH(double t) const;
    /// Non-zero deltaH(t) on the correction cadence within (t_begin, tf].
    std::vector<TimedCorrection> corrections() const;

    void set_knots(const Catchment& c, const std::vector<FactorKnot>& knots);

    /// Calibrated parameters everywhere, no deltaH: reproduces the free run.
    static TruthScenario calibrated(const Catchment& c);
    /// Default truth knots, cosine pulses and the recession drawdown.
    static TruthScenario desk_default(const Catchment& c);
};

struct ObsPlan {
    std::vector<std::string> gauge_stations{"upstream", "middle", "downstream"};
    double gauge_interval = hours(1.0);
    std::vector<double> wsr_times;  // defaults to the scenario's S1 times
    double tau = 0.15;
    double gauge_sigma_min = 0.01;
    double wsr_sigma = 0.1;  // noise std of synthetic WSR observations
    double t0 = 0.0;
    double tf = hours(144.0);

    void validate() const;
    std::vector<double> gauge_times() const;
    /// Every instant the truth run must report for synthesis.
    std::vector<double> all_times() const;
};

/// Shared settings for every deterministic run over the event (truth, free run).
struct EventRequest {
    double t_begin = hours(-6.0);
    double tf = hours(144.0);
    double restart_time = hours(-3.0);    // state kept for the filter's first spin-up
    std::vector<double> record_times;     // observation instants
    std::vector<double> snapshot_times;   // raster instants
    double output_interval = 1800.0;
    double h_wet = kDefaultWetDepth;
};

struct EventRun {
    Trajectory trajectory;  // includes snapshots at snapshot_times
    HydraulicState restart;
    FluxLedger ledger;
    std::size_t steps = 0;
};

/// Cold start at normal depth for the inflow at t_begin, then integrate to tf.
EventRun simulate_event(const Catchment& c, const ParameterSchedule& params, const std::vector<TimedCorrection>& corrections,
                        const EventRequest& req, const SolverSettings& settings = {});

EventRequest event_request(const TruthScenario& scenario, const ObsPlan& plan, double spinup = hours(3.0));

struct TruthOutputs {
    EventRun run;
    std::vector<double> s1_times;
    std::vector<std::vector<std::uint8_t>> rasters;  // wet mask per S1 time (1 wet, 0 dry)
};

/// Wet mask: 1 where h > h_wet on active cells.
std::vector<std::uint8_t> wet_mask(const Grid& grid, const HydraulicState& s, double h_wet = kDefaultWetDepth);

TruthOutputs run_truth(const Catchment& c, const TruthScenario& scenario, const ObsPlan& plan,
                       const SolverSettings& settings = {});

/// Gauge obs = truth + N(0, (tau*truth)^2); WSR obs = truth + N(0, wsr_sigma^2) clipped to [0, 1].
ObservationSet synthesize_observations(const Trajectory& truth, const ObsPlan& plan, std::uint64_t seed);

AsciiGrid mask_to_ascii(const Grid& grid, const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> mask_from_ascii(const Grid& grid, const AsciiGrid& ascii);

}  // namespace floodda
