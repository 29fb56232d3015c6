#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "floodda/catchment.hpp"
#include "floodda/observe.hpp"
#include "floodda/state.hpp"
#include "floodda/swe.hpp"

namespace floodda {

// Control vector layout: Ks[0..6], inflow multiplier a, deltaH[0..4].
inline constexpr int kControlSize = kFrictionZones + 1 + kFloodplainZones;
inline constexpr int kIndexA = kFrictionZones;
inline constexpr int kIndexDeltaH = kFrictionZones + 1;

using ControlMask = std::array<bool, kControlSize>;

struct ControlBounds {
    double Ks_min = 5.0;
    double Ks_max = 100.0;
    double a_min = 0.1;
    double a_max = 3.0;
};

struct ControlVector {
    std::array<double, kControlSize> x{};

    double Ks(int zone) const { return x[static_cast<std::size_t>(zone)]; }
    double a() const { return x[kIndexA]; }
    double deltaH(int zone) const { return x[static_cast<std::size_t>(kIndexDeltaH + zone)]; }
    std::array<double, kFloodplainZones> deltaH() const;

    EffectiveParameters effective() const;
    /// Calibrated Ks, a = 1, deltaH = 0.
    static ControlVector calibrated(const Catchment& c);

    bool operator==(const ControlVector&) const = default;
};

/// Short label used in diagnostics files: Ks0..Ks6, a, dH1..dH5.
std::string control_entry_name(int index);
bool is_deltaH_entry(int index);

/// Clip Ks and a to their bounds; entries outside `mask` are left untouched.
void clip_to_bounds(ControlVector& v, const ControlBounds& bounds, const ControlMask& mask);

struct PriorSpec {
    ControlVector mean;
    std::array<double, kControlSize> sigma{};
    ControlMask active{};

    /// Throws ConfigError on negative or non-finite sigmas.
    void validate() const;
};

struct CycleWindow {
    int cycle = 1;  // 1-based
    double t_start = 0.0;
    double t_end = 0.0;
};

struct CycleSchedule {
    double window = hours(18.0);
    double shift = hours(6.0);
    double spinup = hours(3.0);
    double t0 = 0.0;
    double tf = hours(144.0);

    void validate() const;
    int cycle_count() const;
    /// Window k (1-based) starts at t0 + (k-1)*shift; its end is clipped to tf.
    CycleWindow window_at(int k) const;
};

struct EnsembleMember {
    ControlVector controls;   // analysis of the previous cycle (prior mean before cycle 1)
    HydraulicState restart;   // state at the next window's spin-up start
};

struct Ensemble {
    std::vector<EnsembleMember> members;
    int cycle = 0;  // number of completed cycles
};

/// Every member gets the same restart state and the prior mean.
Ensemble initial_ensemble(const PriorSpec& prior, const HydraulicState& restart, int n_members);

struct ForecastDraw {
    std::vector<ControlVector> members;
    std::array<double, kControlSize> sigma{};  // perturbation std actually used per entry
};

/// Cycle 1 draws x0 + N(0, sigma_x^2). Later cycles draw around the previous
/// analysis mean with std lambda*std(analysis) + (1-lambda)*sigma_x. deltaH is
/// always perturbed about 0 and only when `deltaH_enabled`; otherwise it is 0.
ForecastDraw forecast_controls(const PriorSpec& prior, const std::vector<ControlVector>* previous_analysis, int cycle,
                               bool deltaH_enabled, double lambda, std::uint64_t seed, int n_members,
                               const ControlBounds& bounds = {});

struct PerturbedObservations {
    Eigen::MatrixXd values;  // N_obs x N_e
    std::size_t wsr_clipped = 0;
};

/// Member i gets y + eps_i with eps_i ~ N(0, sigma^2) per observation; WSR
/// values are clipped to [0, 1].
PerturbedObservations perturb_observations(const ObservationSet& obs, int n_members, std::uint64_t seed, int cycle);

/// P_xy = X Y^T / N_e and P_yy = Y Y^T / N_e from member anomalies.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> covariances(const Eigen::MatrixXd& X_anoms, const Eigen::MatrixXd& Y_anoms);

/// Solves K (P_yy + R) = P_xy with a Cholesky factorization; R = diag(r_diag).
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P_xy, const Eigen::MatrixXd& P_yy, const Eigen::VectorXd& r_diag);

/// x_a = x_f + K (y_o - y_f) per member, then clipped. Entries outside `mask`
/// keep their forecast value.
std::vector<ControlVector> analysis_update(const std::vector<ControlVector>& forecast, const Eigen::MatrixXd& y_perturbed,
                                           const Eigen::MatrixXd& y_forecast, const Eigen::MatrixXd& K,
                                           const ControlMask& mask, const ControlBounds& bounds = {});

/// Member-wise anomalies (columns minus row means).
Eigen::MatrixXd anomalies(const Eigen::MatrixXd& M);
Eigen::MatrixXd controls_matrix(const std::vector<ControlVector>& members);

struct FilterSettings {
    int n_members = 32;
    double lambda = 0.3;
    CycleSchedule schedule;
    PriorSpec prior;
    ControlBounds bounds;
    std::uint64_t seed = 1;
    int threads = 1;
    SolverSettings solver;
    double wsr_sigma_hi = 0.2;
    double wsr_sigma_lo = 0.1;
    double h_wet = kDefaultWetDepth;
    double output_interval = 1800.0;
    BiasTable bias;
    std::vector<double> snapshot_times;        // ensemble-mean states kept for these instants
    std::filesystem::path checkpoint_dir;      // empty: keep checkpoints in memory only

    void validate() const;
};

struct CycleDiagnostics {
    int cycle = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t n_gauge = 0;
    std::size_t n_wsr = 0;
    std::size_t wsr_clipped = 0;
    bool deltaH_enabled = false;
    std::array<double, kControlSize> mean_f{}, std_f{}, mean_a{}, std_a{}, sigma_perturbation{};
    std::vector<ControlVector> forecast;
    std::vector<ControlVector> analysis;
    double innovation_rms_f = 0.0;  // RMS of (y_o - mean y_f) over the window, before analysis
};

/// Ensemble-mean analysis diagnostics over [t_start, t_start + shift) of each
/// cycle, concatenated (the last cycle also covers its end instant).
struct CycleOutcome {
    CycleDiagnostics diagnostics;
    Trajectory mean_trajectory;  // levels, wsr and snapshots are ensemble means
};

/// Observations with t in (t_start, t_end]; WSR sigmas follow the window schedule.
ObservationSet observations_in_window(const ObservationSet& all, const CycleWindow& w, double sigma_hi, double sigma_lo);

/// One forecast/analysis cycle; `ensemble` is advanced in place.
CycleOutcome run_cycle(Ensemble& ensemble, const Catchment& c, const ObservationSet& all_obs,
                       const FilterSettings& settings, int k);

struct FilterResult {
    Trajectory mean_trajectory;
    std::vector<CycleDiagnostics> cycles;
};

/// Runs every cycle of the schedule from a common restart state at t0 - spinup.
FilterResult run_filter(const Catchment& c, const HydraulicState& restart, const ObservationSet& obs,
                        const FilterSettings& settings);

void write_cycle_diagnostics_csv(const std::filesystem::path& path, const std::vector<CycleDiagnostics>& cycles);
/// Restores cycle numbers and control moments; other diagnostics stay default.
std::vector<CycleDiagnostics> read_cycle_diagnostics_csv(const std::filesystem::path& path);

/// Apply `fn(i)` for i in [0, n) on up to `threads` workers. The first failure in
/// index order is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace floodda
