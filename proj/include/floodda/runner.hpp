#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "floodda/catchment.hpp"
#include "floodda/enkf.hpp"
#include "floodda/metrics.hpp"
#include "floodda/osse.hpp"
#include "floodda/swe.hpp"

namespace floodda {

enum class ExperimentMode : std::uint8_t { free_run = 0, assimilation = 1 };

struct ExperimentSpec {
    std::string name;
    ExperimentMode mode = ExperimentMode::assimilation;
    bool use_gauges = true;
    bool use_wsr = false;
    ControlMask active{};
    int n_members = 32;

    /// Throws ConfigError on contradictory settings (e.g. deltaH without WSR).
    void validate() const;
    bool controls_deltaH() const;

    /// FR, IDA, IWDA or IHDA with the default control sets.
    static ExperimentSpec standard(const std::string& name, int n_members = 32);
};

struct ScenarioConfig {
    std::vector<FactorKnot> knots = desk_truth_knots();
    std::vector<double> s1_times = desk_s1_times();
    std::vector<int> s1_groups{3, 3, 3};
    int pulsed_groups = 3;
    double pulse_amplitude = 0.15;
    double pulse_half_width = hours(12.0);
    double recession_start = hours(96.0);
    double recession_offset = -0.18;
    std::array<double, kFloodplainZones> zone_weight{1, 1, 1, 1, 1};
    double correction_interval = hours(6.0);
    double t_begin = hours(-6.0);
    int peak_s1_index = 4;  // overpass closest to the flood peak

    TruthScenario build(const Catchment& c, double t0, double tf) const;
};

struct FilterConfig {
    int n_members = 32;
    double lambda = 0.3;
    CycleSchedule schedule;
    double sigma_Ks_relative = 0.15;  // prior std as a fraction of the calibrated Ks
    double sigma_a = 0.15;
    double sigma_deltaH = 0.2;
    ControlBounds bounds;
    double wsr_sigma_hi = 0.2;
    double wsr_sigma_lo = 0.1;
};

struct SuiteConfig {
    CatchmentConfig catchment = CatchmentConfig::desk_default();
    ScenarioConfig scenario;
    ObsPlan plan;
    FilterConfig filter;
    SolverSettings solver;
    std::vector<ExperimentSpec> experiments;
    std::uint64_t seed = 20210130;
    int threads = 1;
    double h_wet = kDefaultWetDepth;
    double output_interval = 1800.0;

    static SuiteConfig desk_default();
    void validate() const;
    const ExperimentSpec& experiment(const std::string& name) const;
    /// Prior for one experiment: calibrated mean, configured sigmas, its active mask.
    PriorSpec prior_for(const ExperimentSpec& spec, const Catchment& c) const;
    FilterSettings filter_settings(const ExperimentSpec& spec, const Catchment& c) const;
};

/// Missing keys keep their defaults; unknown keys raise ConfigError.
SuiteConfig load_config(const std::filesystem::path& path);
SuiteConfig parse_config(const std::string& yaml_text);
/// Canonical text of the effective configuration (also the hash input).
std::string dump_config(const SuiteConfig& cfg);
std::string config_hash(const SuiteConfig& cfg);

struct RunManifest {
    std::string experiment;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string code_version;
    std::string started;
    std::string finished;
    std::string status;  // running | complete | failed
    std::vector<std::string> outputs;  // paths relative to the manifest directory
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);
std::string code_version();
/// Manifest in state "running" stamped with the config hash, seed and start time.
RunManifest start_manifest(const SuiteConfig& cfg, const std::string& name);
/// Sets the final status and finish time.
void finish_manifest(RunManifest& m, const std::string& status);

// --- pipeline stages ---------------------------------------------------------

/// Default output root: $FLOODDA_OUT when set, else ./floodda-out.
std::filesystem::path default_output_root();

Catchment build_catchment(const SuiteConfig& cfg);
void write_catchment_outputs(const std::filesystem::path& dir, const Catchment& c, const TimeAxis& axis);

struct TruthBundle {
    TruthScenario scenario;
    TruthOutputs outputs;
};

TruthBundle run_truth_stage(const SuiteConfig& cfg, const Catchment& c);
void write_truth_outputs(const std::filesystem::path& dir, const TruthBundle& truth, const Catchment& c,
                         const TimeAxis& axis);

/// Trajectory (levels + WSR) and rasters as written by the truth/experiment writers.
struct StoredRun {
    Trajectory trajectory;
    std::vector<std::vector<std::uint8_t>> rasters;
};
StoredRun read_run_outputs(const std::filesystem::path& dir, const Catchment& c, const std::vector<double>& s1_times,
                           const TimeAxis& axis);

ObservationSet synthesize_stage(const SuiteConfig& cfg, const Trajectory& truth);

/// Observation subset an experiment assimilates.
ObservationSet select_observations(const ExperimentSpec& spec, const ObservationSet& all);

/// Calibrated restart state at t0 - spinup shared by every assimilation run.
HydraulicState calibrated_restart(const SuiteConfig& cfg, const Catchment& c);

/// Runs one experiment and writes its outputs and manifest under `dir`.
ExperimentOutputs run_experiment(const SuiteConfig& cfg, const ExperimentSpec& spec, const Catchment& c,
                                 const ObservationSet& obs, const std::filesystem::path& dir);

/// True control values per cycle (scenario parameters at window start, deltaH(t_start)).
std::vector<ControlVector> truth_controls(const SuiteConfig& cfg, const TruthScenario& scenario);

std::vector<ScoreReport> score_stage(const SuiteConfig& cfg, const Catchment& c, const TruthBundle& truth,
                                     const std::vector<ExperimentOutputs>& experiments,
                                     const std::filesystem::path& dir);

struct SuiteResult {
    std::vector<ScoreReport> reports;
    ComparisonTable table;
};

/// truth -> synthesis -> every experiment -> scores, all under `root`.
SuiteResult run_suite(const SuiteConfig& cfg, const std::filesystem::path& root);

}  // namespace floodda
