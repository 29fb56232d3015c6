#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "floodda/catchment.hpp"
#include "floodda/enkf.hpp"
#include "floodda/observe.hpp"

namespace floodda {

/// Root-mean-square difference of two equally long series. Throws on empty input.
double rmse(const std::vector<double>& a, const std::vector<double>& b);

/// Same, after checking both series share their timestamps (AlignmentError otherwise).
double rmse(const std::vector<double>& times_a, const std::vector<double>& a, const std::vector<double>& times_b,
            const std::vector<double>& b);

struct ContingencyCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ContingencyCounts&) const = default;
};

struct CsiResult {
    double csi = 0.0;
    ContingencyCounts counts;
    bool both_dry = false;  // nothing flooded in either raster; csi is set to 1
};

/// Critical success index over cells flagged in `active` (all cells when empty).
CsiResult csi(const std::vector<std::uint8_t>& predicted, const std::vector<std::uint8_t>& truth,
              const std::vector<std::uint8_t>& active = {});

struct ScoreReport {
    std::string experiment;
    std::vector<std::string> stations;
    std::vector<double> station_rmse;               // per station
    std::vector<double> times;                      // output instants over the event span
    std::vector<std::array<double, kFloodplainZones>> wsr_error;  // experiment - truth, per time and zone
    std::vector<double> s1_times;
    std::vector<CsiResult> csi;                     // per S1 time
    // Control space, per cycle: |ensemble-mean analysis - truth| per entry.
    std::vector<int> cycles;
    std::vector<std::array<double, kControlSize>> control_error;
};

struct ExperimentOutputs {
    std::string name;
    Trajectory trajectory;                          // deterministic or ensemble-mean series
    std::vector<std::vector<std::uint8_t>> rasters;  // wet masks at the S1 times
    std::vector<CycleDiagnostics> cycles;           // empty for the free run
};

/// Truth control value per cycle: the scenario parameters at window start and
/// deltaH(t_start); supplied by the caller as one vector per cycle.
ScoreReport score_experiment(const ExperimentOutputs& exp, const Trajectory& truth,
                             const std::vector<std::vector<std::uint8_t>>& truth_rasters,
                             const std::vector<std::string>& stations, const std::vector<double>& s1_times,
                             double t0, double tf, const Grid& grid,
                             const std::vector<ControlVector>& truth_controls = {});

void write_rmse_csv(const std::filesystem::path& path, const ScoreReport& r);
void write_wsr_error_csv(const std::filesystem::path& path, const ScoreReport& r, const TimeAxis& axis);
void write_csi_csv(const std::filesystem::path& path, const ScoreReport& r, const TimeAxis& axis);
void write_control_error_csv(const std::filesystem::path& path, const ScoreReport& r);

struct ComparisonTable {
    std::vector<std::string> experiments;
    std::vector<std::string> stations;
    std::vector<std::vector<double>> rmse;      // [station][experiment]
    std::vector<std::size_t> best;              // per station: index of the lowest RMSE
    std::vector<double> s1_times;
    std::vector<std::vector<double>> csi;       // [s1 time][experiment]
};

ComparisonTable compare(const std::vector<ScoreReport>& reports);
void write_comparison_csv(const std::filesystem::path& rmse_path, const std::filesystem::path& csi_path,
                          const ComparisonTable& t, const TimeAxis& axis);
/// Machine-readable summary of all reports and the comparison table.
void write_summary_json(const std::filesystem::path& path, const std::vector<ScoreReport>& reports,
                        const ComparisonTable& t, const TimeAxis& axis);

}  // namespace floodda
