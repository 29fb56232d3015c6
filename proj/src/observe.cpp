#include "floodda/observe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "floodda/errors.hpp"

namespace floodda {

const char* to_string(ObsKind k) { return k == ObsKind::gauge ? "gauge" : "wsr"; }

ObsKind obs_kind_from_string(const std::string& s) {
    if (s == "gauge") return ObsKind::gauge;
    if (s == "wsr") return ObsKind::wsr;
    throw ConfigError("unknown observation kind '" + s + "'");
}

void validate_observation(const Observation& o) {
    if (!(o.sigma > 0.0) || !std::isfinite(o.sigma)) throw ConfigError("observation sigma must be positive");
    if (!std::isfinite(o.value) || !std::isfinite(o.time)) throw ConfigError("observation value/time must be finite");
    if (o.kind == ObsKind::wsr) {
        if (o.value < 0.0 || o.value > 1.0) throw ConfigError("WSR observation outside [0, 1]");
        zone_index_from_target(o.target);
    }
}

void BiasTable::set(ObsKind kind, const std::string& target, double offset) {
    if (!std::isfinite(offset)) throw ConfigError("bias offsets must be finite");
    offsets_[{kind, target}] = offset;
}

double BiasTable::get(ObsKind kind, const std::string& target) const {
    auto it = offsets_.find({kind, target});
    return it == offsets_.end() ? 0.0 : it->second;
}

BiasTable BiasTable::operator+(const BiasTable& other) const {
    BiasTable sum = *this;
    for (const auto& [key, val] : other.offsets_) sum.offsets_[key] += val;
    return sum;
}

std::optional<std::size_t> Trajectory::find_time(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - times.begin());
}

GaugeReading gauge_level(const Grid& grid, const HydraulicState& s, const Station& station, double h_dry) {
    const double h = s.h[station.cell];
    if (h < h_dry) return {grid.z_b[station.cell], true};
    return {grid.z_b[station.cell] + h, false};
}

double wet_surface_ratio(const Grid& grid, const HydraulicState& s, const FloodplainZones& zones, int zone,
                         double h_wet) {
    const auto& mask = zones.masks.at(static_cast<std::size_t>(zone));
    if (mask.empty()) throw ConfigError("wet_surface_ratio: empty zone");
    std::size_t wet = 0;
    for (auto c : mask)
        if (s.h[c] > h_wet) ++wet;
    // Uniform cells: the area ratio reduces to a count ratio.
    return static_cast<double>(wet) * grid.cell_area() / zones.zone_area[zone];
}

int zone_index_from_target(const std::string& target) {
    if (target.size() == 1 && target[0] >= '1' && target[0] <= '0' + kFloodplainZones) return target[0] - '1';
    throw ConfigError("invalid zone target '" + target + "' (expected 1..5)");
}

std::string zone_target(int zone) { return std::to_string(zone + 1); }

std::vector<double> model_equivalents(const Trajectory& traj, const ObservationSet& obs, const BiasTable& bias) {
    std::vector<double> y;
    y.reserve(obs.size());
    for (const auto& o : obs) {
        const auto k = traj.find_time(o.time);
        if (!k) {
            std::ostringstream msg;
            msg << "no trajectory output at observation time t=" << o.time << " s";
            throw AlignmentError(msg.str());
        }
        double raw = 0.0;
        if (o.kind == ObsKind::gauge) {
            auto it = std::find(traj.station_names.begin(), traj.station_names.end(), o.target);
            if (it == traj.station_names.end()) throw AlignmentError("no recorded station '" + o.target + "'");
            raw = traj.levels[*k][static_cast<std::size_t>(it - traj.station_names.begin())];
        } else {
            raw = traj.wsr[*k][static_cast<std::size_t>(zone_index_from_target(o.target))];
        }
        y.push_back(raw - bias.get(o.kind, o.target));
    }
    return y;
}

double wsr_sigma(double obs_time, double window_start, double window_end, double sigma_hi, double sigma_lo) {
    if (!(window_end > window_start)) throw ConfigError("wsr_sigma: empty window");
    if (obs_time < window_start || obs_time > window_end) throw AlignmentError("wsr_sigma: observation outside window");
    const double w = (obs_time - window_start) / (window_end - window_start);
    return sigma_hi + w * (sigma_lo - sigma_hi);
}

GaugeSigma gauge_sigma(double obs_value, double tau, double sigma_min) {
    const double s = tau * obs_value;
    if (!(obs_value > 0.0) || !(s >= sigma_min)) return {sigma_min, true};
    return {s, false};
}

// --- files -------------------------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

}  // namespace

void write_observations_csv(const std::filesystem::path& path, const ObservationSet& obs, const TimeAxis& axis) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "time_iso8601,kind,target,value,sigma\n";
    for (const auto& o : obs)
        os << axis.iso(o.time) << ',' << to_string(o.kind) << ',' << o.target << ',' << fmt(o.value) << ','
           << fmt(o.sigma) << '\n';
}

ObservationSet read_observations_csv(const std::filesystem::path& path, const TimeAxis& axis) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    ObservationSet obs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || (lineno == 1 && line.rfind("time", 0) == 0)) continue;
        const auto f = split_csv(line);
        if (f.size() != 5) throw ConfigError("observations csv line " + std::to_string(lineno) + ": expected 5 fields");
        Observation o;
        o.time = axis.from_iso(f[0]);
        o.kind = obs_kind_from_string(f[1]);
        o.target = f[2];
        o.value = std::stod(f[3]);
        o.sigma = std::stod(f[4]);
        validate_observation(o);
        obs.push_back(std::move(o));
    }
    return obs;
}

void write_station_series_csv(const std::filesystem::path& path, const Trajectory& traj, const TimeAxis& axis) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "time_iso8601,station,water_level_m\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        for (std::size_t s = 0; s < traj.station_names.size(); ++s)
            os << axis.iso(traj.times[k]) << ',' << traj.station_names[s] << ',' << fmt(traj.levels[k][s]) << '\n';
}

void write_zone_series_csv(const std::filesystem::path& path, const Trajectory& traj, const TimeAxis& axis) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "time_iso8601,zone,wsr\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        for (int z = 0; z < kFloodplainZones; ++z)
            os << axis.iso(traj.times[k]) << ',' << zone_target(z) << ',' << fmt(traj.wsr[k][z]) << '\n';
}

}  // namespace floodda
