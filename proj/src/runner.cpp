#include "floodda/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "floodda/errors.hpp"

#ifndef FLOODDA_VERSION
#define FLOODDA_VERSION "0.0.0"
#endif

namespace floodda {

namespace fs = std::filesystem;

// --- experiments ---------------------------------------------------------------

bool ExperimentSpec::controls_deltaH() const {
    for (int z = 0; z < kFloodplainZones; ++z)
        if (active[kIndexDeltaH + z]) return true;
    return false;
}

void ExperimentSpec::validate() const {
    if (name.empty()) throw ConfigError("experiment without a name");
    const bool any_active = std::any_of(active.begin(), active.end(), [](bool b) { return b; });
    if (mode == ExperimentMode::free_run) {
        if (n_members != 1) throw ConfigError("experiment " + name + ": a free run has exactly one member");
        if (use_gauges || use_wsr) throw ConfigError("experiment " + name + ": a free run assimilates no observations");
        if (any_active) throw ConfigError("experiment " + name + ": a free run controls nothing");
        return;
    }
    if (n_members < 2) throw ConfigError("experiment " + name + ": assimilation needs at least 2 members");
    if (!use_gauges && !use_wsr) throw ConfigError("experiment " + name + ": assimilation without observations");
    if (!any_active) throw ConfigError("experiment " + name + ": no active control entries");
    if (controls_deltaH() && !use_wsr)
        throw ConfigError("experiment " + name + ": deltaH control requires WSR observations");
}

ExperimentSpec ExperimentSpec::standard(const std::string& name, int n_members) {
    ExperimentSpec s;
    s.name = name;
    s.n_members = n_members;
    if (name == "FR") {
        s.mode = ExperimentMode::free_run;
        s.use_gauges = false;
        s.n_members = 1;
        return s;
    }
    for (int j = 0; j <= kIndexA; ++j) s.active[j] = true;
    if (name == "IDA") return s;
    s.use_wsr = true;
    if (name == "IWDA") return s;
    if (name == "IHDA") {
        for (int z = 0; z < kFloodplainZones; ++z) s.active[kIndexDeltaH + z] = true;
        return s;
    }
    throw ConfigError("unknown standard experiment '" + name + "' (FR, IDA, IWDA, IHDA)");
}

TruthScenario ScenarioConfig::build(const Catchment& c, double t0, double tf) const {
    TruthScenario s;
    s.set_knots(c, knots);
    s.s1_times = s1_times;
    s.s1_groups = s1_groups;
    s.pulsed_groups = pulsed_groups;
    s.pulse_amplitude = pulse_amplitude;
    s.pulse_half_width = pulse_half_width;
    s.recession_start = recession_start;
    s.recession_offset = recession_offset;
    s.zone_weight = zone_weight;
    s.correction_interval = correction_interval;
    s.t_begin = t_begin;
    s.t0 = t0;
    s.tf = tf;
    s.validate();
    return s;
}

SuiteConfig SuiteConfig::desk_default() {
    SuiteConfig cfg;
    for (const char* n : {"FR", "IDA", "IWDA", "IHDA"}) cfg.experiments.push_back(ExperimentSpec::standard(n));
    cfg.plan.t0 = cfg.filter.schedule.t0;
    cfg.plan.tf = cfg.filter.schedule.tf;
    cfg.plan.wsr_times = cfg.scenario.s1_times;
    return cfg;
}

void SuiteConfig::validate() const {
    filter.schedule.validate();
    plan.validate();
    if (filter.n_members < 2) throw ConfigError("filter: n_members must be >= 2");
    if (!(filter.lambda >= 0.0 && filter.lambda <= 1.0)) throw ConfigError("filter: lambda must lie in [0, 1]");
    if (!(filter.wsr_sigma_hi > 0.0 && filter.wsr_sigma_lo > 0.0))
        throw ConfigError("filter: WSR sigma schedule must be positive");
    if (!(filter.sigma_Ks_relative >= 0.0) || !(filter.sigma_a >= 0.0) || !(filter.sigma_deltaH >= 0.0))
        throw ConfigError("filter: prior sigmas must be >= 0");
    if (threads < 0) throw ConfigError("threads must be >= 0 (0 = all cores)");
    if (!(h_wet > 0.0)) throw ConfigError("h_wet must be positive");
    if (!(output_interval > 0.0)) throw ConfigError("output interval must be positive");
    if (scenario.t_begin > filter.schedule.t0 - filter.schedule.spinup)
        throw ConfigError("scenario cold start must precede the first spin-up");
    if (scenario.peak_s1_index < 0 || scenario.peak_s1_index >= static_cast<int>(scenario.s1_times.size()))
        throw ConfigError("scenario: peak_s1_index outside the S1 list");
    std::vector<std::string> names;
    for (const auto& e : experiments) {
        e.validate();
        if (std::find(names.begin(), names.end(), e.name) != names.end())
            throw ConfigError("duplicate experiment name '" + e.name + "'");
        names.push_back(e.name);
    }
}

const ExperimentSpec& SuiteConfig::experiment(const std::string& name) const {
    for (const auto& e : experiments)
        if (e.name == name) return e;
    throw ConfigError("no experiment named '" + name + "' in the configuration");
}

PriorSpec SuiteConfig::prior_for(const ExperimentSpec& spec, const Catchment& c) const {
    PriorSpec p;
    p.mean = ControlVector::calibrated(c);
    for (int z = 0; z < kFrictionZones; ++z) p.sigma[z] = filter.sigma_Ks_relative * c.friction.calibrated_Ks[z];
    p.sigma[kIndexA] = filter.sigma_a;
    for (int z = 0; z < kFloodplainZones; ++z) p.sigma[kIndexDeltaH + z] = filter.sigma_deltaH;
    p.active = spec.active;
    return p;
}

FilterSettings SuiteConfig::filter_settings(const ExperimentSpec& spec, const Catchment& c) const {
    FilterSettings f;
    f.n_members = spec.n_members;
    f.lambda = filter.lambda;
    f.schedule = filter.schedule;
    f.prior = prior_for(spec, c);
    f.bounds = filter.bounds;
    f.seed = seed;
    f.threads = threads;
    f.solver = solver;
    f.wsr_sigma_hi = filter.wsr_sigma_hi;
    f.wsr_sigma_lo = filter.wsr_sigma_lo;
    f.h_wet = h_wet;
    f.output_interval = output_interval;
    f.snapshot_times = scenario.s1_times;
    return f;
}

// --- configuration file ----------------------------------------------------------

namespace {

class Node {
public:
    Node(YAML::Node n, std::string path) : n_(std::move(n)), path_(std::move(path)) {}

    void allow(std::initializer_list<const char*> keys) const {
        if (!n_.IsMap()) throw ConfigError(path_ + ": expected a mapping");
        for (const auto& kv : n_) {
            const auto k = kv.first.as<std::string>();
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
                throw ConfigError(path_ + ": unknown key '" + k + "'");
        }
    }
    bool has(const char* key) const { return n_[key].IsDefined() && !n_[key].IsNull(); }
    Node child(const char* key) const { return Node(n_[key], path_ + "." + key); }
    const YAML::Node& raw() const { return n_; }
    const std::string& path() const { return path_; }

    template <class T>
    void get(const char* key, T& out) const {
        if (!has(key)) return;
        try {
            out = n_[key].as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }
    void hours_field(const char* key, double& seconds) const {
        if (!has(key)) return;
        double h = 0.0;
        get(key, h);
        seconds = hours(h);
    }
    template <class T, std::size_t N>
    void array(const char* key, std::array<T, N>& out) const {
        if (!has(key)) return;
        std::vector<T> v;
        get(key, v);
        if (v.size() != N)
            throw ConfigError(path_ + "." + key + ": expected " + std::to_string(N) + " values");
        std::copy(v.begin(), v.end(), out.begin());
    }

private:
    YAML::Node n_;
    std::string path_;
};


void read_catchment_section(const Node& n, CatchmentConfig& c) {
    n.allow({"nx", "ny", "dx", "dy", "channel_first_row", "channel_rows", "slope", "outlet_bed", "dyke_height",
             "terrace_height", "segment_start_cols", "calibrated_Ks", "rating", "origin", "basins", "stations",
             "hydrograph"});
    n.get("nx", c.nx);
    n.get("ny", c.ny);
    n.get("dx", c.dx);
    n.get("dy", c.dy);
    n.get("channel_first_row", c.channel_first_row);
    n.get("channel_rows", c.channel_rows);
    n.get("slope", c.slope);
    n.get("outlet_bed", c.outlet_bed_elevation);
    n.get("dyke_height", c.dyke_height);
    n.get("terrace_height", c.terrace_height);
    n.array("segment_start_cols", c.segment_start_cols);
    n.array("calibrated_Ks", c.calibrated_Ks);
    if (n.has("rating")) {
        auto r = n.child("rating");
        r.allow({"alpha", "beta", "h0"});
        r.get("alpha", c.rating.alpha);
        r.get("beta", c.rating.beta);
        r.get("h0", c.rating.h0);
    }
    if (n.has("origin")) {
        std::string s;
        n.get("origin", s);
        c.time_axis.origin_epoch = parse_iso8601(s);
    }
    if (n.has("basins")) {
        c.basins.clear();
        const auto& list = n.raw()["basins"];
        for (std::size_t k = 0; k < list.size(); ++k) {
            Node b(list[k], n.path() + ".basins[" + std::to_string(k) + "]");
            b.allow({"bank", "first_col", "last_col", "floor_offset", "relief"});
            BasinLayout bl;
            std::string bank = "south";
            b.get("bank", bank);
            if (bank != "south" && bank != "north") throw ConfigError(b.path() + ".bank: expected south or north");
            bl.bank = bank == "south" ? Bank::south : Bank::north;
            b.get("first_col", bl.first_col);
            b.get("last_col", bl.last_col);
            b.get("floor_offset", bl.floor_offset);
            b.get("relief", bl.relief);
            c.basins.push_back(bl);
        }
    }
    if (n.has("stations")) {
        c.stations.clear();
        const auto& list = n.raw()["stations"];
        for (std::size_t k = 0; k < list.size(); ++k) {
            Node s(list[k], n.path() + ".stations[" + std::to_string(k) + "]");
            s.allow({"name", "col", "row", "role"});
            StationLayout sl;
            std::string role = "assimilated";
            s.get("name", sl.name);
            s.get("col", sl.col);
            s.get("row", sl.row);
            s.get("role", role);
            if (role != "assimilated" && role != "validation")
                throw ConfigError(s.path() + ".role: expected assimilated or validation");
            sl.role = role == "assimilated" ? StationRole::assimilated : StationRole::validation;
            c.stations.push_back(sl);
        }
    }
    if (n.has("hydrograph")) {
        auto h = n.child("hydrograph");
        h.allow({"base_flow", "t_begin_h", "t_end_h", "sample_interval_h", "pulses", "csv"});
        h.get("base_flow", c.hydrograph.base_flow);
        h.hours_field("t_begin_h", c.hydrograph.t_begin);
        h.hours_field("t_end_h", c.hydrograph.t_end);
        h.hours_field("sample_interval_h", c.hydrograph.sample_interval);
        if (h.has("csv")) {
            std::string p;
            h.get("csv", p);
            c.hydrograph_csv = p;
        }
        if (h.has("pulses")) {
            c.hydrograph.pulses.clear();
            const auto& list = h.raw()["pulses"];
            for (std::size_t k = 0; k < list.size(); ++k) {
                Node p(list[k], h.path() + ".pulses[" + std::to_string(k) + "]");
                p.allow({"peak_h", "amplitude", "rise_h", "fall_h"});
                FloodPulse fp;
                p.hours_field("peak_h", fp.peak_time);
                p.get("amplitude", fp.amplitude);
                p.hours_field("rise_h", fp.rise);
                p.hours_field("fall_h", fp.fall);
                c.hydrograph.pulses.push_back(fp);
            }
        }
    }
}

std::vector<double> hours_list(const Node& n, const char* key) {
    std::vector<double> h;
    n.get(key, h);
    for (auto& x : h) x = hours(x);
    return h;
}

void read_scenario_section(const Node& n, ScenarioConfig& s) {
    n.allow({"knots", "s1_times_h", "s1_groups", "pulsed_groups", "pulse_amplitude", "pulse_half_width_h",
             "recession_start_h", "recession_offset", "zone_weight", "correction_interval_h", "t_begin_h",
             "peak_s1_index"});
    if (n.has("knots")) {
        s.knots.clear();
        const auto& list = n.raw()["knots"];
        for (std::size_t k = 0; k < list.size(); ++k) {
            Node kn(list[k], n.path() + ".knots[" + std::to_string(k) + "]");
            kn.allow({"time_h", "Ks_factor", "a"});
            FactorKnot f;
            kn.hours_field("time_h", f.time);
            kn.array("Ks_factor", f.Ks_factor);
            kn.get("a", f.a);
            s.knots.push_back(f);
        }
    }
    if (n.has("s1_times_h")) s.s1_times = hours_list(n, "s1_times_h");
    n.get("s1_groups", s.s1_groups);
    n.get("pulsed_groups", s.pulsed_groups);
    n.get("pulse_amplitude", s.pulse_amplitude);
    n.hours_field("pulse_half_width_h", s.pulse_half_width);
    n.hours_field("recession_start_h", s.recession_start);
    n.get("recession_offset", s.recession_offset);
    n.array("zone_weight", s.zone_weight);
    n.hours_field("correction_interval_h", s.correction_interval);
    n.hours_field("t_begin_h", s.t_begin);
    n.get("peak_s1_index", s.peak_s1_index);
}

void read_observation_section(const Node& n, ObsPlan& p) {
    n.allow({"gauge_stations", "gauge_interval_h", "tau", "gauge_sigma_min", "wsr_sigma"});
    n.get("gauge_stations", p.gauge_stations);
    n.hours_field("gauge_interval_h", p.gauge_interval);
    n.get("tau", p.tau);
    n.get("gauge_sigma_min", p.gauge_sigma_min);
    n.get("wsr_sigma", p.wsr_sigma);
}

void read_filter_section(const Node& n, FilterConfig& f) {
    n.allow({"n_members", "lambda", "window_h", "shift_h", "spinup_h", "t0_h", "tf_h", "sigma_Ks_relative", "sigma_a",
             "sigma_deltaH", "bounds", "wsr_sigma_hi", "wsr_sigma_lo"});
    n.get("n_members", f.n_members);
    n.get("lambda", f.lambda);
    n.hours_field("window_h", f.schedule.window);
    n.hours_field("shift_h", f.schedule.shift);
    n.hours_field("spinup_h", f.schedule.spinup);
    n.hours_field("t0_h", f.schedule.t0);
    n.hours_field("tf_h", f.schedule.tf);
    n.get("sigma_Ks_relative", f.sigma_Ks_relative);
    n.get("sigma_a", f.sigma_a);
    n.get("sigma_deltaH", f.sigma_deltaH);
    n.get("wsr_sigma_hi", f.wsr_sigma_hi);
    n.get("wsr_sigma_lo", f.wsr_sigma_lo);
    if (n.has("bounds")) {
        auto b = n.child("bounds");
        b.allow({"Ks_min", "Ks_max", "a_min", "a_max"});
        b.get("Ks_min", f.bounds.Ks_min);
        b.get("Ks_max", f.bounds.Ks_max);
        b.get("a_min", f.bounds.a_min);
        b.get("a_max", f.bounds.a_max);
    }
}

void read_solver_section(const Node& n, SolverSettings& s) {
    n.allow({"cfl", "h_dry", "dt_max", "g", "nu_e"});
    n.get("cfl", s.cfl);
    n.get("h_dry", s.h_dry);
    n.get("dt_max", s.dt_max);
    n.get("g", s.constants.g);
    n.get("nu_e", s.constants.nu_e);
}

ExperimentSpec read_experiment(const Node& n, int default_members) {
    n.allow({"name", "mode", "gauges", "wsr", "controls", "n_members"});
    std::string name;
    n.get("name", name);
    ExperimentSpec e;
    try {
        e = ExperimentSpec::standard(name, default_members);
    } catch (const ConfigError&) {
        e.name = name;
        e.n_members = default_members;
    }
    if (n.has("mode")) {
        std::string m;
        n.get("mode", m);
        if (m != "free_run" && m != "assimilation") throw ConfigError(n.path() + ".mode: free_run or assimilation");
        e.mode = m == "free_run" ? ExperimentMode::free_run : ExperimentMode::assimilation;
        if (e.mode == ExperimentMode::free_run) {
            e.n_members = 1;
            e.use_gauges = e.use_wsr = false;
            e.active = {};
        }
    }
    n.get("gauges", e.use_gauges);
    n.get("wsr", e.use_wsr);
    n.get("n_members", e.n_members);
    if (n.has("controls")) {
        std::vector<std::string> names;
        n.get("controls", names);
        e.active = {};
        for (const auto& c : names) {
            if (c == "Ks") {
                for (int z = 0; z < kFrictionZones; ++z) e.active[z] = true;
            } else if (c == "a") {
                e.active[kIndexA] = true;
            } else if (c == "deltaH") {
                for (int z = 0; z < kFloodplainZones; ++z) e.active[kIndexDeltaH + z] = true;
            } else {
                bool found = false;
                for (int j = 0; j < kControlSize; ++j) {
                    if (control_entry_name(j) == c) {
                        e.active[j] = true;
                        found = true;
                    }
                }
                if (!found) throw ConfigError(n.path() + ".controls: unknown entry '" + c + "'");
            }
        }
    }
    return e;
}

}  // namespace

SuiteConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    SuiteConfig cfg = SuiteConfig::desk_default();
    if (root.IsNull()) return cfg;
    Node n(root, "config");
    n.allow({"seed", "threads", "h_wet", "output_interval_h", "catchment", "scenario", "observations", "filter",
             "solver", "experiments"});
    n.get("seed", cfg.seed);
    n.get("threads", cfg.threads);
    n.get("h_wet", cfg.h_wet);
    n.hours_field("output_interval_h", cfg.output_interval);
    if (n.has("catchment")) read_catchment_section(n.child("catchment"), cfg.catchment);
    if (n.has("scenario")) read_scenario_section(n.child("scenario"), cfg.scenario);
    if (n.has("observations")) read_observation_section(n.child("observations"), cfg.plan);
    if (n.has("filter")) read_filter_section(n.child("filter"), cfg.filter);
    if (n.has("solver")) read_solver_section(n.child("solver"), cfg.solver);
    if (n.has("experiments")) {
        cfg.experiments.clear();
        const auto& list = root["experiments"];
        if (!list.IsSequence()) throw ConfigError("config.experiments: expected a list");
        for (std::size_t k = 0; k < list.size(); ++k)
            cfg.experiments.push_back(
                read_experiment(Node(list[k], "config.experiments[" + std::to_string(k) + "]"), cfg.filter.n_members));
    } else {
        for (auto& e : cfg.experiments)
            if (e.mode == ExperimentMode::assimilation) e.n_members = cfg.filter.n_members;
    }
    cfg.plan.t0 = cfg.filter.schedule.t0;
    cfg.plan.tf = cfg.filter.schedule.tf;
    cfg.plan.wsr_times = cfg.scenario.s1_times;
    cfg.validate();
    return cfg;
}

SuiteConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

namespace {

/// Rewrites every numeric token in its shortest form that still round-trips exactly.
std::string shortest_numbers(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    auto is_delim = [](char ch) { return ch == ' ' || ch == '\n' || ch == ',' || ch == '[' || ch == ']' || ch == '{' || ch == '}'; };
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_delim(text[i])) {
            out += text[i++];
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !is_delim(text[j])) ++j;
        const std::string_view tok(text.data() + i, j - i);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec == std::errc() && end == tok.data() + tok.size() && tok.find_first_of(".eE") != std::string_view::npos) {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof buf, v);
            out.append(buf, r.ptr);
        } else {
            out.append(tok);
        }
        i = j;
    }
    return out;
}

}  // namespace

std::string dump_config(const SuiteConfig& cfg) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    auto h = [](double s) { return s / 3600.0; };
    auto hv = [&](const std::vector<double>& v) {
        std::vector<double> r;
        for (double x : v) r.push_back(h(x));
        return r;
    };
    const auto& c = cfg.catchment;
    out << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << cfg.seed;
    out << YAML::Key << "threads" << YAML::Value << cfg.threads;
    out << YAML::Key << "h_wet" << YAML::Value << cfg.h_wet;
    out << YAML::Key << "output_interval_h" << YAML::Value << h(cfg.output_interval);

    out << YAML::Key << "catchment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "nx" << YAML::Value << c.nx << YAML::Key << "ny" << YAML::Value << c.ny;
    out << YAML::Key << "dx" << YAML::Value << c.dx << YAML::Key << "dy" << YAML::Value << c.dy;
    out << YAML::Key << "channel_first_row" << YAML::Value << c.channel_first_row;
    out << YAML::Key << "channel_rows" << YAML::Value << c.channel_rows;
    out << YAML::Key << "slope" << YAML::Value << c.slope;
    out << YAML::Key << "outlet_bed" << YAML::Value << c.outlet_bed_elevation;
    out << YAML::Key << "dyke_height" << YAML::Value << c.dyke_height;
    out << YAML::Key << "terrace_height" << YAML::Value << c.terrace_height;
    out << YAML::Key << "segment_start_cols" << YAML::Value << YAML::Flow
        << std::vector<int>(c.segment_start_cols.begin(), c.segment_start_cols.end());
    out << YAML::Key << "calibrated_Ks" << YAML::Value << YAML::Flow
        << std::vector<double>(c.calibrated_Ks.begin(), c.calibrated_Ks.end());
    out << YAML::Key << "rating" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "alpha" << YAML::Value
        << c.rating.alpha << YAML::Key << "beta" << YAML::Value << c.rating.beta << YAML::Key << "h0" << YAML::Value
        << c.rating.h0 << YAML::EndMap;
    out << YAML::Key << "origin" << YAML::Value << format_iso8601(c.time_axis.origin_epoch);
    out << YAML::Key << "basins" << YAML::Value << YAML::BeginSeq;
    for (const auto& b : c.basins)
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "bank" << YAML::Value
            << (b.bank == Bank::south ? "south" : "north") << YAML::Key << "first_col" << YAML::Value << b.first_col
            << YAML::Key << "last_col" << YAML::Value << b.last_col << YAML::Key << "floor_offset" << YAML::Value
            << b.floor_offset << YAML::Key << "relief" << YAML::Value << b.relief << YAML::EndMap;
    out << YAML::EndSeq;
    out << YAML::Key << "stations" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : c.stations)
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << s.name << YAML::Key << "col"
            << YAML::Value << s.col << YAML::Key << "row" << YAML::Value << s.row << YAML::Key << "role" << YAML::Value
            << (s.role == StationRole::assimilated ? "assimilated" : "validation") << YAML::EndMap;
    out << YAML::EndSeq;
    out << YAML::Key << "hydrograph" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "base_flow" << YAML::Value << c.hydrograph.base_flow;
    out << YAML::Key << "t_begin_h" << YAML::Value << h(c.hydrograph.t_begin);
    out << YAML::Key << "t_end_h" << YAML::Value << h(c.hydrograph.t_end);
    out << YAML::Key << "sample_interval_h" << YAML::Value << h(c.hydrograph.sample_interval);
    if (!c.hydrograph_csv.empty()) out << YAML::Key << "csv" << YAML::Value << c.hydrograph_csv.string();
    out << YAML::Key << "pulses" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : c.hydrograph.pulses)
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "peak_h" << YAML::Value << h(p.peak_time) << YAML::Key
            << "amplitude" << YAML::Value << p.amplitude << YAML::Key << "rise_h" << YAML::Value << h(p.rise)
            << YAML::Key << "fall_h" << YAML::Value << h(p.fall) << YAML::EndMap;
    out << YAML::EndSeq << YAML::EndMap;
    out << YAML::EndMap;

    const auto& s = cfg.scenario;
    out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "knots" << YAML::Value << YAML::BeginSeq;
    for (const auto& k : s.knots)
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "time_h" << YAML::Value << h(k.time) << YAML::Key
            << "Ks_factor" << YAML::Value << std::vector<double>(k.Ks_factor.begin(), k.Ks_factor.end()) << YAML::Key
            << "a" << YAML::Value << k.a << YAML::EndMap;
    out << YAML::EndSeq;
    out << YAML::Key << "s1_times_h" << YAML::Value << YAML::Flow << hv(s.s1_times);
    out << YAML::Key << "s1_groups" << YAML::Value << YAML::Flow << s.s1_groups;
    out << YAML::Key << "pulsed_groups" << YAML::Value << s.pulsed_groups;
    out << YAML::Key << "pulse_amplitude" << YAML::Value << s.pulse_amplitude;
    out << YAML::Key << "pulse_half_width_h" << YAML::Value << h(s.pulse_half_width);
    out << YAML::Key << "recession_start_h" << YAML::Value << h(s.recession_start);
    out << YAML::Key << "recession_offset" << YAML::Value << s.recession_offset;
    out << YAML::Key << "zone_weight" << YAML::Value << YAML::Flow
        << std::vector<double>(s.zone_weight.begin(), s.zone_weight.end());
    out << YAML::Key << "correction_interval_h" << YAML::Value << h(s.correction_interval);
    out << YAML::Key << "t_begin_h" << YAML::Value << h(s.t_begin);
    out << YAML::Key << "peak_s1_index" << YAML::Value << s.peak_s1_index;
    out << YAML::EndMap;

    const auto& p = cfg.plan;
    out << YAML::Key << "observations" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "gauge_stations" << YAML::Value << YAML::Flow << p.gauge_stations;
    out << YAML::Key << "gauge_interval_h" << YAML::Value << h(p.gauge_interval);
    out << YAML::Key << "tau" << YAML::Value << p.tau;
    out << YAML::Key << "gauge_sigma_min" << YAML::Value << p.gauge_sigma_min;
    out << YAML::Key << "wsr_sigma" << YAML::Value << p.wsr_sigma;
    out << YAML::EndMap;

    const auto& f = cfg.filter;
    out << YAML::Key << "filter" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n_members" << YAML::Value << f.n_members;
    out << YAML::Key << "lambda" << YAML::Value << f.lambda;
    out << YAML::Key << "window_h" << YAML::Value << h(f.schedule.window);
    out << YAML::Key << "shift_h" << YAML::Value << h(f.schedule.shift);
    out << YAML::Key << "spinup_h" << YAML::Value << h(f.schedule.spinup);
    out << YAML::Key << "t0_h" << YAML::Value << h(f.schedule.t0);
    out << YAML::Key << "tf_h" << YAML::Value << h(f.schedule.tf);
    out << YAML::Key << "sigma_Ks_relative" << YAML::Value << f.sigma_Ks_relative;
    out << YAML::Key << "sigma_a" << YAML::Value << f.sigma_a;
    out << YAML::Key << "sigma_deltaH" << YAML::Value << f.sigma_deltaH;
    out << YAML::Key << "bounds" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "Ks_min" << YAML::Value
        << f.bounds.Ks_min << YAML::Key << "Ks_max" << YAML::Value << f.bounds.Ks_max << YAML::Key << "a_min"
        << YAML::Value << f.bounds.a_min << YAML::Key << "a_max" << YAML::Value << f.bounds.a_max << YAML::EndMap;
    out << YAML::Key << "wsr_sigma_hi" << YAML::Value << f.wsr_sigma_hi;
    out << YAML::Key << "wsr_sigma_lo" << YAML::Value << f.wsr_sigma_lo;
    out << YAML::EndMap;

    out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "cfl" << YAML::Value << cfg.solver.cfl;
    out << YAML::Key << "h_dry" << YAML::Value << cfg.solver.h_dry;
    out << YAML::Key << "dt_max" << YAML::Value << cfg.solver.dt_max;
    out << YAML::Key << "g" << YAML::Value << cfg.solver.constants.g;
    out << YAML::Key << "nu_e" << YAML::Value << cfg.solver.constants.nu_e;
    out << YAML::EndMap;

    out << YAML::Key << "experiments" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : cfg.experiments) {
        std::vector<std::string> ctl;
        for (int j = 0; j < kControlSize; ++j)
            if (e.active[j]) ctl.push_back(control_entry_name(j));
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << e.name << YAML::Key << "mode"
            << YAML::Value << (e.mode == ExperimentMode::free_run ? "free_run" : "assimilation") << YAML::Key
            << "gauges" << YAML::Value << e.use_gauges << YAML::Key << "wsr" << YAML::Value << e.use_wsr << YAML::Key
            << "controls" << YAML::Value << ctl << YAML::Key << "n_members" << YAML::Value << e.n_members
            << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
    return shortest_numbers(out.c_str()) + "\n";
}

std::string config_hash(const SuiteConfig& cfg) {
    // FNV-1a, 64 bit: stable across platforms, unlike std::hash.
    std::uint64_t hv = 1469598103934665603ULL;
    for (unsigned char ch : dump_config(cfg)) {
        hv ^= ch;
        hv *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hv));
    return buf;
}

// --- manifest ------------------------------------------------------------------

std::string code_version() { return FLOODDA_VERSION; }

namespace {

std::string now_iso() { return format_iso8601(static_cast<std::int64_t>(std::time(nullptr))); }

}  // namespace

RunManifest start_manifest(const SuiteConfig& cfg, const std::string& name) {
    RunManifest m;
    m.experiment = name;
    m.config_hash = config_hash(cfg);
    m.seed = cfg.seed;
    m.code_version = code_version();
    m.started = now_iso();
    m.status = "running";
    return m;
}

void finish_manifest(RunManifest& m, const std::string& status) {
    m.status = status;
    m.finished = now_iso();
}

void write_manifest(const fs::path& path, const RunManifest& m) {
    nlohmann::ordered_json j;
    j["experiment"] = m.experiment;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["code_version"] = m.code_version;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["status"] = m.status;
    j["outputs"] = m.outputs;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest " + path.string());
    os << j.dump(2) << '\n';
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read manifest " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    RunManifest m;
    m.experiment = j.value("experiment", "");
    m.config_hash = j.value("config_hash", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.code_version = j.value("code_version", "");
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.status = j.value("status", "");
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
}

// --- stages --------------------------------------------------------------------

fs::path default_output_root() {
    if (const char* env = std::getenv("FLOODDA_OUT"); env && *env) return env;
    return "floodda-out";
}

Catchment build_catchment(const SuiteConfig& cfg) { return generate_synthetic_catchment(cfg.catchment); }

void write_catchment_outputs(const fs::path& dir, const Catchment& c, const TimeAxis& axis) {
    fs::create_directories(dir);
    write_catchment(dir / "catchment.bin", c);
    write_ascii_grid(dir / "dem.asc", to_ascii_grid(c.grid, c.grid.z_b));
    std::vector<double> fz(c.grid.size()), zones(c.grid.size(), 0.0);
    for (std::size_t k = 0; k < fz.size(); ++k) fz[k] = c.friction.zone_id[k];
    for (int z = 0; z < kFloodplainZones; ++z)
        for (auto cell : c.zones.masks[z]) zones[cell] = z + 1;
    write_ascii_grid(dir / "friction_zones.asc", to_ascii_grid(c.grid, fz));
    write_ascii_grid(dir / "floodplain_zones.asc", to_ascii_grid(c.grid, zones));
    write_hydrograph_csv(dir / "hydrograph.csv", c.bc.upstream_hydrograph, axis);
}

namespace {

EventRequest suite_event_request(const SuiteConfig& cfg, const TruthScenario& sc) {
    EventRequest req = event_request(sc, cfg.plan, cfg.filter.schedule.spinup);
    req.h_wet = cfg.h_wet;
    req.output_interval = cfg.output_interval;
    return req;
}

Trajectory clip_span(const Trajectory& t, double t0, double tf) {
    Trajectory out;
    out.station_names = t.station_names;
    for (std::size_t k = 0; k < t.times.size(); ++k) {
        if (t.times[k] < t0 || t.times[k] > tf) continue;
        out.times.push_back(t.times[k]);
        out.levels.push_back(t.levels[k]);
        out.wsr.push_back(t.wsr[k]);
    }
    return out;
}

std::string raster_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "extent_%02zu.asc", k + 1);
    return buf;
}

std::vector<std::string> write_series_and_rasters(const fs::path& dir, const Trajectory& traj,
                                                  const std::vector<std::vector<std::uint8_t>>& rasters,
                                                  const std::vector<double>& s1_times, const Catchment& c,
                                                  const TimeAxis& axis) {
    fs::create_directories(dir);
    std::vector<std::string> files{"station_levels.csv", "zone_wsr.csv", "s1_times.csv"};
    write_station_series_csv(dir / "station_levels.csv", traj, axis);
    write_zone_series_csv(dir / "zone_wsr.csv", traj, axis);
    std::ofstream os(dir / "s1_times.csv");
    if (!os) throw IoError("cannot write " + (dir / "s1_times.csv").string());
    os << "index,time_iso8601,raster\n";
    for (std::size_t k = 0; k < rasters.size(); ++k) {
        write_ascii_grid(dir / raster_name(k), mask_to_ascii(c.grid, rasters[k]));
        os << k + 1 << ',' << axis.iso(s1_times[k]) << ',' << raster_name(k) << '\n';
        files.push_back(raster_name(k));
    }
    return files;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

}  // namespace

TruthBundle run_truth_stage(const SuiteConfig& cfg, const Catchment& c) {
    TruthBundle b;
    b.scenario = cfg.scenario.build(c, cfg.filter.schedule.t0, cfg.filter.schedule.tf);
    const auto req = suite_event_request(cfg, b.scenario);
    b.outputs.run = simulate_event(c, b.scenario.parameters(), b.scenario.corrections(), req, cfg.solver);
    b.outputs.s1_times = b.scenario.s1_times;
    for (const auto& s : b.outputs.run.trajectory.snapshots)
        b.outputs.rasters.push_back(wet_mask(c.grid, s, cfg.h_wet));
    return b;
}

void write_truth_outputs(const fs::path& dir, const TruthBundle& truth, const Catchment& c, const TimeAxis& axis) {
    const auto traj = clip_span(truth.outputs.run.trajectory, truth.scenario.t0, truth.scenario.tf);
    write_series_and_rasters(dir, traj, truth.outputs.rasters, truth.outputs.s1_times, c, axis);
}

StoredRun read_run_outputs(const fs::path& dir, const Catchment& c, const std::vector<double>& s1_times,
                           const TimeAxis& axis) {
    StoredRun r;
    auto& t = r.trajectory;
    for (const auto& s : c.stations) t.station_names.push_back(s.name);
    std::map<double, std::size_t> row;
    auto slot = [&](double time) {
        auto [it, fresh] = row.emplace(time, t.times.size());
        if (fresh) {
            t.times.push_back(time);
            t.levels.emplace_back(t.station_names.size(), std::nan(""));
            t.wsr.push_back({});
        }
        return it->second;
    };
    {
        std::ifstream is(dir / "station_levels.csv");
        if (!is) throw IoError("missing series file " + (dir / "station_levels.csv").string());
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
            const auto f = split(line);
            if (f.size() != 3) throw IoError("malformed line in station_levels.csv");
            const auto k = slot(axis.from_iso(f[0]));
            t.levels[k][c.station_index(f[1])] = std::stod(f[2]);
        }
    }
    {
        std::ifstream is(dir / "zone_wsr.csv");
        if (!is) throw IoError("missing series file " + (dir / "zone_wsr.csv").string());
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
            const auto f = split(line);
            if (f.size() != 3) throw IoError("malformed line in zone_wsr.csv");
            const auto k = slot(axis.from_iso(f[0]));
            t.wsr[k][static_cast<std::size_t>(zone_index_from_target(f[1]))] = std::stod(f[2]);
        }
    }
    if (!std::is_sorted(t.times.begin(), t.times.end())) throw AlignmentError("series in " + dir.string() + " not sorted");
    for (std::size_t k = 0; k < s1_times.size(); ++k) {
        const auto p = dir / raster_name(k);
        if (!fs::exists(p)) throw IoError("missing raster " + p.string());
        r.rasters.push_back(mask_from_ascii(c.grid, read_ascii_grid(p)));
    }
    return r;
}

ObservationSet synthesize_stage(const SuiteConfig& cfg, const Trajectory& truth) {
    return synthesize_observations(truth, cfg.plan, cfg.seed);
}

ObservationSet select_observations(const ExperimentSpec& spec, const ObservationSet& all) {
    ObservationSet out;
    for (const auto& o : all)
        if ((o.kind == ObsKind::gauge && spec.use_gauges) || (o.kind == ObsKind::wsr && spec.use_wsr)) out.push_back(o);
    return out;
}

HydraulicState calibrated_restart(const SuiteConfig& cfg, const Catchment& c) {
    auto sc = cfg.scenario.build(c, cfg.filter.schedule.t0, cfg.filter.schedule.tf);
    auto req = suite_event_request(cfg, sc);
    // Same stops as the free run up to the restart instant, hence the same state.
    req.tf = req.restart_time;
    const auto p = EffectiveParameters::calibrated(c);
    return simulate_event(c, ParameterSchedule(p), {}, req, cfg.solver).restart;
}

ExperimentOutputs run_experiment(const SuiteConfig& cfg, const ExperimentSpec& spec, const Catchment& c,
                                 const ObservationSet& obs, const fs::path& dir) {
    spec.validate();
    const auto& axis = cfg.catchment.time_axis;
    fs::create_directories(dir);
    auto m = start_manifest(cfg, spec.name);
    write_manifest(dir / "manifest.json", m);

    const auto sc = cfg.scenario.build(c, cfg.filter.schedule.t0, cfg.filter.schedule.tf);
    ExperimentOutputs out;
    out.name = spec.name;
    try {
        if (spec.mode == ExperimentMode::free_run) {
            const auto req = suite_event_request(cfg, sc);
            auto ev = simulate_event(c, ParameterSchedule(EffectiveParameters::calibrated(c)), {}, req, cfg.solver);
            for (const auto& s : ev.trajectory.snapshots) out.rasters.push_back(wet_mask(c.grid, s, cfg.h_wet));
            out.trajectory = clip_span(ev.trajectory, sc.t0, sc.tf);
        } else {
            const auto selected = select_observations(spec, obs);
            if (selected.empty()) throw ConfigError("experiment " + spec.name + ": no observations to assimilate");
            auto fsets = cfg.filter_settings(spec, c);
            fsets.checkpoint_dir = dir / "cycles";
            auto res = run_filter(c, calibrated_restart(cfg, c), selected, fsets);
            for (const auto& s : res.mean_trajectory.snapshots) out.rasters.push_back(wet_mask(c.grid, s, cfg.h_wet));
            out.trajectory = clip_span(res.mean_trajectory, sc.t0, sc.tf);
            out.cycles = std::move(res.cycles);
            write_cycle_diagnostics_csv(dir / "cycles.csv", out.cycles);
            m.outputs.push_back("cycles.csv");
            for (const auto& d : out.cycles)
                if (d.cycle < cfg.filter.schedule.cycle_count())
                    for (int i = 0; i < spec.n_members; ++i)
                        m.outputs.push_back("cycles/" + std::to_string(d.cycle) + "/member_" + std::to_string(i) + ".ckpt");
        }
        if (out.rasters.size() != sc.s1_times.size())
            throw AlignmentError("experiment " + spec.name + ": rasters do not cover every S1 time");
        auto files = write_series_and_rasters(dir, out.trajectory, out.rasters, sc.s1_times, c, axis);
        m.outputs.insert(m.outputs.begin(), files.begin(), files.end());
    } catch (...) {
        finish_manifest(m, "failed");
        write_manifest(dir / "manifest.json", m);
        throw;
    }
    finish_manifest(m, "complete");
    write_manifest(dir / "manifest.json", m);
    return out;
}

std::vector<ControlVector> truth_controls(const SuiteConfig& cfg, const TruthScenario& sc) {
    std::vector<ControlVector> out;
    const auto params = sc.parameters();
    const auto& sch = cfg.filter.schedule;
    for (int k = 1; k <= sch.cycle_count(); ++k) {
        const double t = sch.window_at(k).t_start;
        const auto p = params.at(t);
        ControlVector v;
        for (int z = 0; z < kFrictionZones; ++z) v.x[z] = p.Ks[z];
        v.x[kIndexA] = p.inflow_multiplier;
        const auto d = sc.deltaH(t);
        for (int z = 0; z < kFloodplainZones; ++z) v.x[kIndexDeltaH + z] = d[z];
        out.push_back(v);
    }
    return out;
}

std::vector<ScoreReport> score_stage(const SuiteConfig& cfg, const Catchment& c, const TruthBundle& truth,
                                     const std::vector<ExperimentOutputs>& experiments, const fs::path& dir) {
    fs::create_directories(dir);
    const auto& axis = cfg.catchment.time_axis;
    std::vector<std::string> stations;
    for (const auto& s : c.stations) stations.push_back(s.name);
    const auto tc = truth_controls(cfg, truth.scenario);
    const auto truth_traj = clip_span(truth.outputs.run.trajectory, truth.scenario.t0, truth.scenario.tf);
    std::vector<ScoreReport> reports;
    for (const auto& e : experiments) {
        reports.push_back(score_experiment(e, truth_traj, truth.outputs.rasters, stations, truth.scenario.s1_times,
                                           truth.scenario.t0, truth.scenario.tf, c.grid, tc));
        const auto& r = reports.back();
        write_rmse_csv(dir / ("rmse_" + r.experiment + ".csv"), r);
        write_wsr_error_csv(dir / ("wsr_error_" + r.experiment + ".csv"), r, axis);
        write_csi_csv(dir / ("csi_" + r.experiment + ".csv"), r, axis);
        if (!r.cycles.empty()) write_control_error_csv(dir / ("control_error_" + r.experiment + ".csv"), r);
    }
    const auto table = compare(reports);
    write_comparison_csv(dir / "comparison_rmse.csv", dir / "comparison_csi.csv", table, axis);
    write_summary_json(dir / "summary.json", reports, table, axis);
    return reports;
}

SuiteResult run_suite(const SuiteConfig& cfg, const fs::path& root) {
    cfg.validate();
    const auto& axis = cfg.catchment.time_axis;
    fs::create_directories(root);
    auto m = start_manifest(cfg, "suite");
    {
        std::ofstream os(root / "config.yaml");
        os << dump_config(cfg);
    }
    m.outputs.push_back("config.yaml");
    write_manifest(root / "manifest.json", m);

    SuiteResult out;
    try {
        const auto c = build_catchment(cfg);
        write_catchment_outputs(root / "catchment", c, axis);
        m.outputs.push_back("catchment/");
        const auto truth = run_truth_stage(cfg, c);
        write_truth_outputs(root / "truth", truth, c, axis);
        m.outputs.push_back("truth/");
        const auto obs = synthesize_stage(cfg, truth.outputs.run.trajectory);
        fs::create_directories(root / "observations");
        write_observations_csv(root / "observations" / "observations.csv", obs, axis);
        m.outputs.push_back("observations/");
        std::vector<ExperimentOutputs> exps;
        for (const auto& spec : cfg.experiments) {
            exps.push_back(run_experiment(cfg, spec, c, obs, root / spec.name));
            m.outputs.push_back(spec.name + "/");
            write_manifest(root / "manifest.json", m);
        }
        out.reports = score_stage(cfg, c, truth, exps, root / "scores");
        out.table = compare(out.reports);
        m.outputs.push_back("scores/");
    } catch (...) {
        finish_manifest(m, "failed");
        write_manifest(root / "manifest.json", m);
        throw;
    }
    finish_manifest(m, "complete");
    write_manifest(root / "manifest.json", m);
    return out;
}

}  // namespace floodda
