#include "floodda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "floodda/errors.hpp"

namespace floodda {

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw AlignmentError("rmse: series lengths differ");
    if (a.empty()) throw ConfigError("rmse: empty series");
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(sum / static_cast<double>(a.size()));
}

double rmse(const std::vector<double>& ta, const std::vector<double>& a, const std::vector<double>& tb,
            const std::vector<double>& b) {
    if (ta.size() != a.size() || tb.size() != b.size()) throw AlignmentError("rmse: times and values differ in length");
    if (ta != tb) throw AlignmentError("rmse: series do not share timestamps");
    return rmse(a, b);
}

CsiResult csi(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
              const std::vector<std::uint8_t>& active) {
    if (pred.size() != truth.size() || (!active.empty() && active.size() != truth.size()))
        throw AlignmentError("csi: rasters are not congruent");
    CsiResult r;
    auto& n = r.counts;
    for (std::size_t c = 0; c < pred.size(); ++c) {
        if (!active.empty() && !active[c]) continue;
        const bool p = pred[c] != 0;
        const bool t = truth[c] != 0;
        if (p && t) ++n.tp;
        else if (p) ++n.fp;
        else if (t) ++n.fn;
        else ++n.tn;
    }
    const auto denom = n.tp + n.fp + n.fn;
    if (denom == 0) {
        r.csi = 1.0;
        r.both_dry = true;
    } else {
        r.csi = static_cast<double>(n.tp) / static_cast<double>(denom);
    }
    return r;
}

namespace {

std::size_t station_column(const Trajectory& t, const std::string& name, const std::string& who) {
    auto it = std::find(t.station_names.begin(), t.station_names.end(), name);
    if (it == t.station_names.end()) throw AlignmentError(who + ": missing station series '" + name + "'");
    return static_cast<std::size_t>(it - t.station_names.begin());
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw IoError("cannot open " + p.string() + " for writing");
    return os;
}

}  // namespace

ScoreReport score_experiment(const ExperimentOutputs& exp, const Trajectory& truth,
                             const std::vector<std::vector<std::uint8_t>>& truth_rasters,
                             const std::vector<std::string>& stations, const std::vector<double>& s1_times, double t0,
                             double tf, const Grid& grid, const std::vector<ControlVector>& truth_controls) {
    ScoreReport r;
    r.experiment = exp.name;
    r.stations = stations;
    const auto& et = exp.trajectory;

    std::vector<std::size_t> ek, tk;
    for (std::size_t k = 0; k < et.times.size(); ++k) {
        const double t = et.times[k];
        if (t < t0 || t > tf) continue;
        const auto j = truth.find_time(t);
        if (!j) throw AlignmentError(exp.name + ": truth has no output at t=" + fmt(t) + " s");
        ek.push_back(k);
        tk.push_back(*j);
        r.times.push_back(t);
    }
    if (r.times.empty()) throw AlignmentError(exp.name + ": missing series over the event span");

    for (const auto& name : stations) {
        const auto ce = station_column(et, name, exp.name);
        const auto ct = station_column(truth, name, "truth");
        std::vector<double> a, b;
        for (std::size_t q = 0; q < ek.size(); ++q) {
            a.push_back(et.levels[ek[q]][ce]);
            b.push_back(truth.levels[tk[q]][ct]);
        }
        r.station_rmse.push_back(rmse(a, b));
    }
    for (std::size_t q = 0; q < ek.size(); ++q) {
        std::array<double, kFloodplainZones> e{};
        for (int z = 0; z < kFloodplainZones; ++z) e[z] = et.wsr[ek[q]][z] - truth.wsr[tk[q]][z];
        r.wsr_error.push_back(e);
    }

    if (exp.rasters.size() != s1_times.size()) throw AlignmentError(exp.name + ": missing flood-extent rasters");
    if (truth_rasters.size() != s1_times.size()) throw AlignmentError("truth: missing flood-extent rasters");
    std::vector<std::uint8_t> active(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) active[c] = grid.active(c) ? 1 : 0;
    r.s1_times = s1_times;
    for (std::size_t q = 0; q < s1_times.size(); ++q) r.csi.push_back(csi(exp.rasters[q], truth_rasters[q], active));

    if (!truth_controls.empty() && !exp.cycles.empty()) {
        if (truth_controls.size() != exp.cycles.size())
            throw AlignmentError(exp.name + ": truth controls do not match the cycle count");
        for (std::size_t q = 0; q < exp.cycles.size(); ++q) {
            std::array<double, kControlSize> e{};
            for (int j = 0; j < kControlSize; ++j) e[j] = std::abs(exp.cycles[q].mean_a[j] - truth_controls[q].x[j]);
            r.cycles.push_back(exp.cycles[q].cycle);
            r.control_error.push_back(e);
        }
    }
    return r;
}

void write_rmse_csv(const std::filesystem::path& path, const ScoreReport& r) {
    auto os = open_out(path);
    os << "experiment,station,rmse_m\n";
    for (std::size_t s = 0; s < r.stations.size(); ++s)
        os << r.experiment << ',' << r.stations[s] << ',' << fmt(r.station_rmse[s]) << '\n';
}

void write_wsr_error_csv(const std::filesystem::path& path, const ScoreReport& r, const TimeAxis& axis) {
    auto os = open_out(path);
    os << "experiment,time_iso8601,zone,wsr_error\n";
    for (std::size_t q = 0; q < r.times.size(); ++q)
        for (int z = 0; z < kFloodplainZones; ++z)
            os << r.experiment << ',' << axis.iso(r.times[q]) << ',' << zone_target(z) << ',' << fmt(r.wsr_error[q][z])
               << '\n';
}

void write_csi_csv(const std::filesystem::path& path, const ScoreReport& r, const TimeAxis& axis) {
    auto os = open_out(path);
    os << "experiment,time_iso8601,csi,tp,fp,fn,tn,both_dry\n";
    for (std::size_t q = 0; q < r.s1_times.size(); ++q) {
        const auto& c = r.csi[q];
        os << r.experiment << ',' << axis.iso(r.s1_times[q]) << ',' << fmt(c.csi) << ',' << c.counts.tp << ','
           << c.counts.fp << ',' << c.counts.fn << ',' << c.counts.tn << ',' << (c.both_dry ? 1 : 0) << '\n';
    }
}

void write_control_error_csv(const std::filesystem::path& path, const ScoreReport& r) {
    auto os = open_out(path);
    os << "experiment,cycle,entry,abs_error\n";
    for (std::size_t q = 0; q < r.cycles.size(); ++q)
        for (int j = 0; j < kControlSize; ++j)
            os << r.experiment << ',' << r.cycles[q] << ',' << control_entry_name(j) << ','
               << fmt(r.control_error[q][j]) << '\n';
}

ComparisonTable compare(const std::vector<ScoreReport>& reports) {
    ComparisonTable t;
    if (reports.empty()) return t;
    t.stations = reports.front().stations;
    t.s1_times = reports.front().s1_times;
    for (const auto& r : reports) {
        if (r.stations != t.stations || r.s1_times != t.s1_times)
            throw AlignmentError("compare: reports cover different stations or S1 times");
        t.experiments.push_back(r.experiment);
    }
    t.rmse.assign(t.stations.size(), std::vector<double>(reports.size()));
    for (std::size_t s = 0; s < t.stations.size(); ++s) {
        for (std::size_t e = 0; e < reports.size(); ++e) t.rmse[s][e] = reports[e].station_rmse[s];
        t.best.push_back(static_cast<std::size_t>(std::min_element(t.rmse[s].begin(), t.rmse[s].end()) - t.rmse[s].begin()));
    }
    t.csi.assign(t.s1_times.size(), std::vector<double>(reports.size()));
    for (std::size_t q = 0; q < t.s1_times.size(); ++q)
        for (std::size_t e = 0; e < reports.size(); ++e) t.csi[q][e] = reports[e].csi[q].csi;
    return t;
}

void write_comparison_csv(const std::filesystem::path& rmse_path, const std::filesystem::path& csi_path,
                          const ComparisonTable& t, const TimeAxis& axis) {
    {
        auto os = open_out(rmse_path);
        os << "station";
        for (const auto& e : t.experiments) os << ',' << e;
        os << ",best\n";
        for (std::size_t s = 0; s < t.stations.size(); ++s) {
            os << t.stations[s];
            for (std::size_t e = 0; e < t.experiments.size(); ++e) {
                os << ',' << fmt(t.rmse[s][e]);
                if (e == t.best[s]) os << '*';
            }
            os << ',' << t.experiments[t.best[s]] << '\n';
        }
    }
    auto os = open_out(csi_path);
    os << "time_iso8601";
    for (const auto& e : t.experiments) os << ',' << e;
    os << '\n';
    for (std::size_t q = 0; q < t.s1_times.size(); ++q) {
        os << axis.iso(t.s1_times[q]);
        for (double v : t.csi[q]) os << ',' << fmt(v);
        os << '\n';
    }
}

void write_summary_json(const std::filesystem::path& path, const std::vector<ScoreReport>& reports,
                        const ComparisonTable& t, const TimeAxis& axis) {
    nlohmann::ordered_json j;
    j["experiments"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json e;
        e["name"] = r.experiment;
        for (std::size_t s = 0; s < r.stations.size(); ++s) e["rmse_m"][r.stations[s]] = r.station_rmse[s];
        e["csi"] = nlohmann::ordered_json::array();
        for (std::size_t q = 0; q < r.s1_times.size(); ++q)
            e["csi"].push_back({{"time", axis.iso(r.s1_times[q])},
                                {"csi", r.csi[q].csi},
                                {"both_dry", r.csi[q].both_dry}});
        j["experiments"].push_back(std::move(e));
    }
    for (std::size_t s = 0; s < t.stations.size(); ++s) j["best_rmse"][t.stations[s]] = t.experiments[t.best[s]];
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

}  // namespace floodda
