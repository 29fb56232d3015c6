#include "floodda/catchment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "floodda/errors.hpp"

namespace floodda {

std::size_t Grid::active_count() const {
    return static_cast<std::size_t>(std::count_if(kind.begin(), kind.end(),
                                                  [](CellKind k) { return k != CellKind::inactive; }));
}

RatingEvaluation rating_curve_discharge(const RatingCurve& rc, double level) {
    if (!(level > rc.h0)) return {0.0, level < rc.h0};
    return {rc.alpha * std::pow(level - rc.h0, rc.beta), false};
}

void validate_hydrograph(const Hydrograph& hg) {
    if (hg.t.size() != hg.q.size() || hg.t.empty()) throw ConfigError("hydrograph: empty or ragged series");
    for (std::size_t k = 0; k < hg.t.size(); ++k) {
        if (!std::isfinite(hg.t[k]) || !std::isfinite(hg.q[k])) throw ConfigError("hydrograph: non-finite sample");
        if (hg.q[k] < 0.0) throw ConfigError("hydrograph: negative discharge");
        if (k > 0 && !(hg.t[k] > hg.t[k - 1])) throw ConfigError("hydrograph: timestamps not strictly increasing");
    }
}

double hydrograph_at(const Hydrograph& hg, double t) {
    if (hg.t.empty() || t < hg.t.front() || t > hg.t.back()) {
        std::ostringstream msg;
        msg << "hydrograph: t=" << t << " s lies outside the sampled span";
        throw ExtrapolationError(msg.str());
    }
    auto it = std::upper_bound(hg.t.begin(), hg.t.end(), t);
    if (it == hg.t.end()) return hg.q.back();
    const auto k = static_cast<std::size_t>(it - hg.t.begin());
    const double t0 = hg.t[k - 1];
    const double t1 = hg.t[k];
    const double w = (t - t0) / (t1 - t0);
    return hg.q[k - 1] + w * (hg.q[k] - hg.q[k - 1]);
}

double hydrograph_at(const BoundaryConditions& bc, double t) { return hydrograph_at(bc.upstream_hydrograph, t); }

const Station& Catchment::station(std::string_view name) const { return stations[station_index(name)]; }

std::size_t Catchment::station_index(std::string_view name) const {
    for (std::size_t s = 0; s < stations.size(); ++s)
        if (stations[s].name == name) return s;
    throw ConfigError("unknown station '" + std::string(name) + "'");
}

void Catchment::validate() const {
    const auto n = grid.size();
    if (grid.nx <= 0 || grid.ny <= 0) throw ConfigError("grid: nx*ny must be positive");
    if (!(grid.dx > 0.0) || !(grid.dy > 0.0)) throw ConfigError("grid: cell sizes must be positive");
    if (grid.z_b.size() != n || grid.kind.size() != n || friction.zone_id.size() != n)
        throw ConfigError("grid: per-cell arrays do not match nx*ny");
    for (std::size_t c = 0; c < n; ++c) {
        if (!std::isfinite(grid.z_b[c])) throw ConfigError("grid: non-finite bottom elevation");
        if (grid.active(c) && friction.zone_id[c] >= kFrictionZones) throw ConfigError("friction: zone id out of range");
    }
    for (double ks : friction.calibrated_Ks)
        if (!(ks > 0.0 && ks < 200.0)) throw ConfigError("friction: calibrated Ks outside (0, 200)");

    std::vector<std::uint8_t> owner(n, 0);
    for (int z = 0; z < kFloodplainZones; ++z) {
        const auto& mask = zones.masks[z];
        if (mask.empty()) throw ConfigError("floodplain zone " + std::to_string(z + 1) + " is empty");
        for (auto c : mask) {
            if (c >= n || grid.kind[c] != CellKind::floodplain)
                throw ConfigError("floodplain zone " + std::to_string(z + 1) + " contains a non-floodplain cell");
            if (owner[c]) throw ConfigError("floodplain zones overlap");
            owner[c] = 1;
        }
    }
    std::set<std::string> names;
    for (const auto& s : stations) {
        if (s.cell >= n || !grid.active(s.cell)) throw ConfigError("station '" + s.name + "' is not on an active cell");
        if (!names.insert(s.name).second) throw ConfigError("duplicate station name '" + s.name + "'");
    }
    validate_hydrograph(bc.upstream_hydrograph);
    if (!(bc.downstream.alpha > 0.0) || !(bc.downstream.beta > 0.0))
        throw ConfigError("rating curve: alpha and beta must be positive");
    for (auto c : bc.inflow_cells)
        if (c >= n || !grid.active(c)) throw ConfigError("inflow cell is not active");
    for (auto c : bc.outflow_cells)
        if (c >= n || !grid.active(c)) throw ConfigError("outflow cell is not active");
}

// --- synthetic generator -----------------------------------------------------

Hydrograph synthetic_flood_hydrograph(const HydrographConfig& cfg) {
    if (!(cfg.t_end > cfg.t_begin) || !(cfg.sample_interval > 0.0))
        throw ConfigError("hydrograph config: empty span or non-positive sample interval");
    Hydrograph hg;
    const auto n = static_cast<std::size_t>(std::ceil((cfg.t_end - cfg.t_begin) / cfg.sample_interval - 1e-9));
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = std::min(cfg.t_begin + static_cast<double>(k) * cfg.sample_interval, cfg.t_end);
        double q = cfg.base_flow;
        for (const auto& p : cfg.pulses) {
            const double w = t < p.peak_time ? p.rise : p.fall;
            const double s = (t - p.peak_time) / w;
            q += p.amplitude * std::exp(-s * s);
        }
        hg.t.push_back(t);
        hg.q.push_back(q);
    }
    return hg;
}

CatchmentConfig CatchmentConfig::desk_default() {
    CatchmentConfig cfg;
    cfg.basins = {
        {Bank::south, 4, 13, 3.0, 3.0},
        {Bank::north, 11, 20, 3.2, 3.0},
        {Bank::south, 19, 28, 3.1, 3.0},
        {Bank::north, 27, 36, 3.3, 3.0},
        {Bank::south, 34, 43, 3.0, 3.0},
    };
    cfg.stations = {
        {"upstream", 3, 4, StationRole::assimilated},
        {"middle", 25, 4, StationRole::assimilated},
        {"downstream", 46, 4, StationRole::assimilated},
        {"floodplain", 12, 9, StationRole::validation},
    };
    cfg.hydrograph.base_flow = 350.0;
    cfg.hydrograph.pulses = {
        {hours(40.0), 550.0, hours(14.0), hours(18.0)},
        {hours(76.0), 1250.0, hours(16.0), hours(26.0)},
    };
    cfg.hydrograph.t_begin = hours(-6.0);
    cfg.hydrograph.t_end = hours(150.0);
    cfg.hydrograph.sample_interval = 3600.0;
    cfg.time_axis.origin_epoch = parse_iso8601("2021-01-30T00:00:00Z");
    return cfg;
}

Catchment generate_synthetic_catchment(const CatchmentConfig& cfg) {
    if (cfg.basins.size() < static_cast<std::size_t>(kFloodplainZones))
        throw ConfigError("catchment config defines " + std::to_string(cfg.basins.size()) +
                          " floodplain zones; 5 are required");
    if (cfg.basins.size() > static_cast<std::size_t>(kFloodplainZones))
        throw ConfigError("catchment config defines more than 5 floodplain zones");
    if (cfg.stations.size() < 3) throw ConfigError("catchment config needs at least 3 stations");
    if (cfg.nx < 2 || cfg.ny < 1 || !(cfg.dx > 0.0) || !(cfg.dy > 0.0)) throw ConfigError("catchment config: bad grid size");
    const int ch0 = cfg.channel_first_row;
    const int ch1 = cfg.channel_first_row + cfg.channel_rows;  // one past the last channel row
    if (cfg.channel_rows < 1 || ch0 < 0 || ch1 > cfg.ny) throw ConfigError("catchment config: channel rows outside the grid");
    if (cfg.segment_start_cols[0] != 0) throw ConfigError("catchment config: first friction segment must start at column 0");
    for (std::size_t s = 1; s < cfg.segment_start_cols.size(); ++s)
        if (cfg.segment_start_cols[s] <= cfg.segment_start_cols[s - 1] || cfg.segment_start_cols[s] >= cfg.nx)
            throw ConfigError("catchment config: friction segment columns must increase within the grid");

    Catchment c;
    Grid& g = c.grid;
    g.nx = cfg.nx;
    g.ny = cfg.ny;
    g.dx = cfg.dx;
    g.dy = cfg.dy;
    g.z_b.assign(g.size(), 0.0);
    g.kind.assign(g.size(), CellKind::floodplain);
    c.friction.zone_id.assign(g.size(), 0);
    c.friction.calibrated_Ks = cfg.calibrated_Ks;

    const double length = cfg.nx * cfg.dx;
    auto bed = [&](int i) { return cfg.outlet_bed_elevation + cfg.slope * (length - (i + 0.5) * cfg.dx); };

    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const auto cell = g.index(i, j);
            if (j >= ch0 && j < ch1) {
                g.kind[cell] = CellKind::channel;
                g.z_b[cell] = bed(i);
                int seg = 0;
                while (seg + 1 < 6 && i >= cfg.segment_start_cols[seg + 1]) ++seg;
                c.friction.zone_id[cell] = static_cast<std::uint8_t>(seg + 1);
            } else if (j == ch0 - 1 || j == ch1) {
                g.z_b[cell] = bed(i) + cfg.dyke_height;
            } else {
                g.z_b[cell] = bed(i) + cfg.terrace_height;
            }
        }
    }

    for (int z = 0; z < kFloodplainZones; ++z) {
        const auto& b = cfg.basins[z];
        if (b.first_col < 0 || b.last_col >= g.nx || b.last_col < b.first_col)
            throw ConfigError("basin " + std::to_string(z + 1) + ": column range outside the grid");
        if (!(b.relief >= 0.0)) throw ConfigError("basin " + std::to_string(z + 1) + ": negative relief");
        std::vector<int> rows;
        if (b.bank == Bank::south) {
            for (int j = ch0 - 2; j >= 0; --j) rows.push_back(j);  // nearest the dyke first
        } else {
            for (int j = ch1 + 1; j < g.ny; ++j) rows.push_back(j);
        }
        if (rows.empty()) throw ConfigError("basin " + std::to_string(z + 1) + ": no floodplain rows on that bank");
        const int ncols = b.last_col - b.first_col + 1;
        const int ncells = ncols * static_cast<int>(rows.size());
        const double base = bed((b.first_col + b.last_col) / 2) + b.floor_offset;
        auto& mask = c.zones.masks[z];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (int i = b.first_col; i <= b.last_col; ++i) {
                const auto cell = g.index(i, rows[r]);
                if (std::find(mask.begin(), mask.end(), cell) != mask.end()) continue;
                // Rank 0 is the lowest cell: far from the dyke, upstream end.
                const int rank = static_cast<int>(rows.size() - 1 - r) * ncols + (i - b.first_col);
                const double frac = ncells > 1 ? static_cast<double>(rank) / (ncells - 1) : 0.0;
                g.z_b[cell] = base + b.relief * frac;
                mask.push_back(cell);
            }
        }
        std::sort(mask.begin(), mask.end());
        c.zones.zone_area[z] = static_cast<double>(mask.size()) * g.cell_area();
    }

    for (const auto& s : cfg.stations) {
        if (s.col < 0 || s.col >= g.nx || s.row < 0 || s.row >= g.ny)
            throw ConfigError("station '" + s.name + "' lies outside the grid");
        c.stations.push_back({s.name, g.index(s.col, s.row), s.role});
    }

    for (int j = ch0; j < ch1; ++j) {
        c.bc.inflow_cells.push_back(g.index(0, j));
        c.bc.outflow_cells.push_back(g.index(g.nx - 1, j));
    }
    c.bc.downstream = cfg.rating;
    if (!(cfg.rating.alpha > 0.0)) {
        // Uniform-flow rating for the outlet cross-section: Q = Ks B sqrt(S) (h-h0)^(5/3).
        const double width = cfg.channel_rows * cfg.dy;
        const double ks_out = cfg.calibrated_Ks[6];
        c.bc.downstream.alpha = ks_out * width * std::sqrt(std::max(cfg.slope, 1e-6));
        c.bc.downstream.beta = 5.0 / 3.0;
        c.bc.downstream.h0 = bed(g.nx - 1);
    }
    c.bc.upstream_hydrograph = cfg.hydrograph_csv.empty()
                                   ? synthetic_flood_hydrograph(cfg.hydrograph)
                                   : read_hydrograph_csv(cfg.hydrograph_csv, cfg.time_axis);

    c.validate();
    return c;
}

// --- persistence -------------------------------------------------------------

namespace {
constexpr char kCatchmentMagic[8] = {'F', 'D', 'A', 'C', 'A', 'T', 'C', 'H'};
constexpr std::uint32_t kCatchmentVersion = 1;
}  // namespace

void write_catchment(const std::filesystem::path& path, const Catchment& c) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    using namespace binio;
    put_magic(os, kCatchmentMagic, kCatchmentVersion);
    put<std::int32_t>(os, c.grid.nx);
    put<std::int32_t>(os, c.grid.ny);
    put(os, c.grid.dx);
    put(os, c.grid.dy);
    put_vec(os, c.grid.z_b);
    put_vec(os, c.grid.kind);
    put_vec(os, c.friction.zone_id);
    put(os, c.friction.calibrated_Ks);
    for (int z = 0; z < kFloodplainZones; ++z) {
        put_vec(os, c.zones.masks[z]);
        put(os, c.zones.zone_area[z]);
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(c.stations.size()));
    for (const auto& s : c.stations) {
        put_str(os, s.name);
        put<std::uint64_t>(os, s.cell);
        put(os, s.role);
    }
    put_vec(os, c.bc.upstream_hydrograph.t);
    put_vec(os, c.bc.upstream_hydrograph.q);
    put(os, c.bc.downstream);
    put_vec(os, c.bc.inflow_cells);
    put_vec(os, c.bc.outflow_cells);
    if (!os) throw IoError("write failed: " + path.string());
}

Catchment read_catchment(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    using namespace binio;
    expect_magic(is, kCatchmentMagic, kCatchmentVersion);
    Catchment c;
    c.grid.nx = get<std::int32_t>(is);
    c.grid.ny = get<std::int32_t>(is);
    c.grid.dx = get<double>(is);
    c.grid.dy = get<double>(is);
    c.grid.z_b = get_vec<double>(is);
    c.grid.kind = get_vec<CellKind>(is);
    c.friction.zone_id = get_vec<std::uint8_t>(is);
    c.friction.calibrated_Ks = get<std::array<double, kFrictionZones>>(is);
    for (int z = 0; z < kFloodplainZones; ++z) {
        c.zones.masks[z] = get_vec<std::size_t>(is);
        c.zones.zone_area[z] = get<double>(is);
    }
    const auto ns = get<std::uint32_t>(is);
    for (std::uint32_t s = 0; s < ns; ++s) {
        Station st;
        st.name = get_str(is);
        st.cell = get<std::uint64_t>(is);
        st.role = get<StationRole>(is);
        c.stations.push_back(std::move(st));
    }
    c.bc.upstream_hydrograph.t = get_vec<double>(is);
    c.bc.upstream_hydrograph.q = get_vec<double>(is);
    c.bc.downstream = get<RatingCurve>(is);
    c.bc.inflow_cells = get_vec<std::size_t>(is);
    c.bc.outflow_cells = get_vec<std::size_t>(is);
    c.validate();
    return c;
}

void write_hydrograph_csv(const std::filesystem::path& path, const Hydrograph& hg, const TimeAxis& axis) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "timestamp_iso8601,discharge_m3s\n";
    char buf[64];
    for (std::size_t k = 0; k < hg.t.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", hg.q[k]);
        os << axis.iso(hg.t[k]) << ',' << buf << '\n';
    }
}

Hydrograph read_hydrograph_csv(const std::filesystem::path& path, const TimeAxis& axis) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    Hydrograph hg;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("timestamp", 0) == 0) continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("hydrograph csv: malformed line '" + line + "'");
        hg.t.push_back(axis.from_iso(line.substr(0, comma)));
        hg.q.push_back(std::stod(line.substr(comma + 1)));
    }
    validate_hydrograph(hg);
    return hg;
}

AsciiGrid to_ascii_grid(const Grid& grid, const std::vector<double>& field, double nodata) {
    if (grid.dx != grid.dy) throw IoError("ESRI ASCII export requires square cells");
    if (field.size() != grid.size()) throw IoError("field size does not match grid");
    AsciiGrid a;
    a.ncols = grid.nx;
    a.nrows = grid.ny;
    a.cellsize = grid.dx;
    a.nodata_value = nodata;
    a.values.resize(grid.size());
    for (int r = 0; r < grid.ny; ++r) {
        const int j = grid.ny - 1 - r;
        for (int i = 0; i < grid.nx; ++i) {
            const auto c = grid.index(i, j);
            a.values[static_cast<std::size_t>(r) * grid.nx + i] = grid.active(c) ? field[c] : nodata;
        }
    }
    return a;
}

std::vector<double> from_ascii_grid(const Grid& grid, const AsciiGrid& a) {
    if (a.ncols != grid.nx || a.nrows != grid.ny) throw IoError("ascii grid shape does not match catchment grid");
    std::vector<double> field(grid.size());
    for (int r = 0; r < grid.ny; ++r) {
        const int j = grid.ny - 1 - r;
        for (int i = 0; i < grid.nx; ++i) field[grid.index(i, j)] = a.at(r, i);
    }
    return field;
}

}  // namespace floodda
