#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "floodda/catchment.hpp"
#include "floodda/observe.hpp"
#include "floodda/state.hpp"

namespace floodda {

struct PhysicalConstants {
    double g = 9.81;
    double nu_e = 0.0;  // momentum diffusion [m^2/s]; 0 disables the term
    double rho_w = 1000.0;
    double rho_air = 1.225;
    double C_d = 1.5e-3;
};

/// Empty vectors mean uniform pressure and calm air.
struct AtmosphericForcing {
    std::vector<double> p_atm;
    std::vector<double> wind_x;
    std::vector<double> wind_y;
};

struct SolverSettings {
    double cfl = 0.7;
    double h_dry = 1e-3;
    double dt_max = 60.0;
    PhysicalConstants constants;
    AtmosphericForcing forcing;
};

/// What the forward model needs from a control vector.
struct EffectiveParameters {
    std::array<double, kFrictionZones> Ks{};
    double inflow_multiplier = 1.0;

    static EffectiveParameters calibrated(const Catchment& c);
};

/// Constant parameters, or piecewise-linear in time between knots (held
/// constant outside the knot span).
class ParameterSchedule {
public:
    ParameterSchedule() = default;
    ParameterSchedule(const EffectiveParameters& constant);  // NOLINT(google-explicit-constructor)
    static ParameterSchedule piecewise_linear(std::vector<double> times, std::vector<EffectiveParameters> values);

    EffectiveParameters at(double t) const;

private:
    std::vector<double> times_;
    std::vector<EffectiveParameters> values_;
};

/// Volumes crossing the open boundaries, accumulated over steps.
struct FluxLedger {
    double inflow_volume = 0.0;
    double outflow_volume = 0.0;
    std::size_t below_datum_steps = 0;
};

double stable_dt(const HydraulicState& s, const Catchment& c, double cfl, const SolverSettings& settings = {});

/// One explicit finite-volume step. Throws NumericalError on a non-finite result.
HydraulicState step(const HydraulicState& s, const Catchment& c, const EffectiveParameters& p, double dt,
                    const SolverSettings& settings = {}, FluxLedger* ledger = nullptr);

struct CorrectionResult {
    HydraulicState state;
    std::size_t clamped_cells = 0;
};

/// Shift the free surface of wet cells in each zone by deltaH; depth is
/// clamped at zero and dry cells stay dry.
CorrectionResult apply_state_correction(const HydraulicState& s, const Catchment& c,
                                        const std::array<double, kFloodplainZones>& deltaH,
                                        double h_dry = 1e-3);

struct TimedCorrection {
    double time = 0.0;
    std::array<double, kFloodplainZones> deltaH{};
};

struct RunRequest {
    double t_end = 0.0;
    std::vector<double> checkpoint_times;
    std::vector<double> snapshot_times;  // full states kept in the trajectory
    std::vector<double> record_times;    // extra diagnostic instants (observation times)
    double output_interval = 1800.0;     // diagnostic cadence, anchored at t = 0
    bool record_initial = false;         // also record diagnostics at the start time
    std::vector<TimedCorrection> corrections;
    double h_wet = kDefaultWetDepth;
};

struct RunResult {
    HydraulicState final_state;
    Trajectory trajectory;
    FluxLedger ledger;
    std::size_t steps = 0;
    std::size_t clamped_cells = 0;
};

/// Integrate to t_end with adaptive dt, landing exactly on every output,
/// record, snapshot, checkpoint and correction instant.
RunResult run(const HydraulicState& initial, const Catchment& c, const ParameterSchedule& params,
              const RunRequest& request, const SolverSettings& settings = {});

/// Channel at Strickler normal depth for the given discharge (bed slope
/// taken from the channel end cells), floodplain dry.
HydraulicState normal_depth_state(const Catchment& c, const EffectiveParameters& p, double discharge, double t);

}  // namespace floodda
