#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "floodda/catchment.hpp"
#include "floodda/state.hpp"

namespace floodda {

/// SAR cannot see film-thin water; cells count as wet above this depth.
inline constexpr double kDefaultWetDepth = 0.05;

enum class ObsKind : std::uint8_t { gauge = 0, wsr = 1 };

const char* to_string(ObsKind k);
ObsKind obs_kind_from_string(const std::string& s);

struct Observation {
    ObsKind kind = ObsKind::gauge;
    std::string target;  // station name, or zone id "1".."5"
    double time = 0.0;   // model seconds
    double value = 0.0;
    double sigma = 1.0;

    bool operator==(const Observation&) const = default;
};

using ObservationSet = std::vector<Observation>;

/// Throws ConfigError when an observation breaks its invariants.
void validate_observation(const Observation& o);

/// Constant model-observation offsets keyed by (kind, target); absent keys are 0.
class BiasTable {
public:
    void set(ObsKind kind, const std::string& target, double offset);
    double get(ObsKind kind, const std::string& target) const;
    BiasTable operator+(const BiasTable& other) const;

private:
    std::map<std::pair<ObsKind, std::string>, double> offsets_;
};

/// Diagnostics recorded by the solver at its output instants.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::string> station_names;
    std::vector<std::vector<double>> levels;                    // [time][station]
    std::vector<std::array<double, kFloodplainZones>> wsr;     // [time][zone]
    std::vector<HydraulicState> checkpoints;                    // one per requested checkpoint time
    std::vector<HydraulicState> snapshots;                      // one per requested snapshot time

    std::optional<std::size_t> find_time(double t) const;
};

struct GaugeReading {
    double level = 0.0;
    bool dry = false;
};

GaugeReading gauge_level(const Grid& grid, const HydraulicState& s, const Station& station, double h_dry = 1e-3);

double wet_surface_ratio(const Grid& grid, const HydraulicState& s, const FloodplainZones& zones, int zone,
                         double h_wet = kDefaultWetDepth);

/// Zone identifiers in observation files are 1-based ("1".."5").
int zone_index_from_target(const std::string& target);
std::string zone_target(int zone);

/// Model equivalent of each observation minus its bias, in obs_set order.
std::vector<double> model_equivalents(const Trajectory& traj, const ObservationSet& obs, const BiasTable& bias);

/// Linearly decreasing WSR error schedule across an assimilation window.
double wsr_sigma(double obs_time, double window_start, double window_end, double sigma_hi = 0.2,
                 double sigma_lo = 0.1);

struct GaugeSigma {
    double sigma = 0.0;
    bool floored = false;
};

/// Error proportional to the observed level, floored at sigma_min.
GaugeSigma gauge_sigma(double obs_value, double tau = 0.15, double sigma_min = 0.01);

// --- files -------------------------------------------------------------------

void write_observations_csv(const std::filesystem::path& path, const ObservationSet& obs, const TimeAxis& axis);
ObservationSet read_observations_csv(const std::filesystem::path& path, const TimeAxis& axis);

void write_station_series_csv(const std::filesystem::path& path, const Trajectory& traj, const TimeAxis& axis);
void write_zone_series_csv(const std::filesystem::path& path, const Trajectory& traj, const TimeAxis& axis);

}  // namespace floodda
