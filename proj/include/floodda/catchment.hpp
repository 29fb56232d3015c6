#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "floodda/esri_ascii.hpp"
#include "floodda/timeutil.hpp"

namespace floodda {

inline constexpr int kFrictionZones = 7;    // 0 = floodplain, 1..6 = riverbed segments
inline constexpr int kFloodplainZones = 5;  // controlled storage areas

enum class CellKind : std::uint8_t { inactive = 0, channel = 1, floodplain = 2 };

/// Structured grid, cell (i, j) stored at j*nx + i; i runs along-flow
/// (west to east), j across (south to north).
struct Grid {
    int nx = 0;
    int ny = 0;
    double dx = 0.0;
    double dy = 0.0;
    std::vector<double> z_b;
    std::vector<CellKind> kind;

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    int col(std::size_t c) const { return static_cast<int>(c % nx); }
    int row(std::size_t c) const { return static_cast<int>(c / nx); }
    double cell_area() const { return dx * dy; }
    bool active(std::size_t c) const { return kind[c] != CellKind::inactive; }
    std::size_t active_count() const;

    bool operator==(const Grid&) const = default;
};

struct FrictionZoning {
    std::vector<std::uint8_t> zone_id;  // per cell; meaningless on inactive cells
    std::array<double, kFrictionZones> calibrated_Ks{};

    bool operator==(const FrictionZoning&) const = default;
};

struct FloodplainZones {
    std::array<std::vector<std::size_t>, kFloodplainZones> masks;
    std::array<double, kFloodplainZones> zone_area{};

    bool operator==(const FloodplainZones&) const = default;
};

enum class StationRole : std::uint8_t { assimilated = 0, validation = 1 };

struct Station {
    std::string name;
    std::size_t cell = 0;
    StationRole role = StationRole::assimilated;

    bool operator==(const Station&) const = default;
};

/// Stage-discharge power law Q = alpha * (h - h0)^beta.
struct RatingCurve {
    double alpha = 1.0;
    double beta = 1.0;
    double h0 = 0.0;

    bool operator==(const RatingCurve&) const = default;
};

struct RatingEvaluation {
    double discharge = 0.0;
    bool below_datum = false;
};

RatingEvaluation rating_curve_discharge(const RatingCurve& rc, double level);

struct Hydrograph {
    std::vector<double> t;  // model seconds, strictly increasing
    std::vector<double> q;  // m^3/s, non-negative

    bool operator==(const Hydrograph&) const = default;
};

struct BoundaryConditions {
    Hydrograph upstream_hydrograph;
    RatingCurve downstream;
    std::vector<std::size_t> inflow_cells;   // receive the hydrograph across their west face
    std::vector<std::size_t> outflow_cells;  // drain through their east face

    bool operator==(const BoundaryConditions&) const = default;
};

/// Linear interpolation of the upstream hydrograph; throws outside its span.
double hydrograph_at(const BoundaryConditions& bc, double t);
double hydrograph_at(const Hydrograph& hg, double t);
void validate_hydrograph(const Hydrograph& hg);

struct Catchment {
    Grid grid;
    FrictionZoning friction;
    FloodplainZones zones;
    std::vector<Station> stations;
    BoundaryConditions bc;

    const Station& station(std::string_view name) const;
    std::size_t station_index(std::string_view name) const;
    /// Throws ConfigError when an invariant of the domain types is violated.
    void validate() const;

    bool operator==(const Catchment&) const = default;
};

// --- synthetic generator -----------------------------------------------------

enum class Bank : std::uint8_t { south = 0, north = 1 };

/// One floodplain storage basin behind the dyke on the given bank, spanning
/// columns [first_col, last_col] and every row between the dyke and the
/// domain edge. Floor elevations are graded linearly over `relief` metres
/// starting `floor_offset` above the channel bed at the basin centre.
struct BasinLayout {
    Bank bank = Bank::south;
    int first_col = 0;
    int last_col = 0;
    double floor_offset = 2.0;
    double relief = 2.0;
};

struct StationLayout {
    std::string name;
    int col = 0;
    int row = 0;
    StationRole role = StationRole::assimilated;
};

/// Asymmetric Gaussian flood pulse added on top of the base flow.
struct FloodPulse {
    double peak_time = 0.0;  // model seconds
    double amplitude = 0.0;  // m^3/s above base flow
    double rise = 1.0;       // e-folding half-width before the peak [s]
    double fall = 1.0;       // after the peak [s]
};

struct HydrographConfig {
    double base_flow = 350.0;
    std::vector<FloodPulse> pulses;
    double t_begin = 0.0;
    double t_end = 0.0;
    double sample_interval = 3600.0;
};

Hydrograph synthetic_flood_hydrograph(const HydrographConfig& cfg);

struct CatchmentConfig {
    int nx = 50;
    int ny = 10;
    double dx = 100.0;
    double dy = 100.0;
    int channel_first_row = 4;
    int channel_rows = 2;
    double slope = 2.0e-4;
    double outlet_bed_elevation = 0.0;
    double dyke_height = 4.0;     // crest above local channel bed
    double terrace_height = 5.0;  // non-basin floodplain ground above local bed
    /// Column at which riverbed friction segment s+1 begins (6 entries, first 0).
    std::array<int, 6> segment_start_cols{0, 8, 17, 25, 33, 42};
    std::array<double, kFrictionZones> calibrated_Ks{17.0, 45.0, 38.0, 38.0, 40.0, 40.0, 40.0};
    std::vector<BasinLayout> basins;
    std::vector<StationLayout> stations;
    RatingCurve rating{0.0, 5.0 / 3.0, 0.0};  // alpha <= 0: derive from uniform flow at the outlet
    HydrographConfig hydrograph;
    std::filesystem::path hydrograph_csv;  // overrides `hydrograph` when set
    TimeAxis time_axis;

    static CatchmentConfig desk_default();
};

Catchment generate_synthetic_catchment(const CatchmentConfig& config);

// --- persistence -------------------------------------------------------------

void write_catchment(const std::filesystem::path& path, const Catchment& c);
Catchment read_catchment(const std::filesystem::path& path);

void write_hydrograph_csv(const std::filesystem::path& path, const Hydrograph& hg, const TimeAxis& axis);
Hydrograph read_hydrograph_csv(const std::filesystem::path& path, const TimeAxis& axis);

/// Export a per-cell field; inactive cells become NODATA. Requires dx == dy.
AsciiGrid to_ascii_grid(const Grid& grid, const std::vector<double>& field, double nodata = -9999.0);
std::vector<double> from_ascii_grid(const Grid& grid, const AsciiGrid& ascii);

}  // namespace floodda
