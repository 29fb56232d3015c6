#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "floodda/errors.hpp"
#include "floodda/runner.hpp"

namespace py = pybind11;
using namespace floodda;

namespace {

py::array_t<double> matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    py::array_t<double> a({rows.size(), cols});
    auto m = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    return a;
}

template <class T>
py::array_t<T> grid_array(const Grid& g, const std::vector<T>& v) {
    py::array_t<T> a({static_cast<std::size_t>(g.ny), static_cast<std::size_t>(g.nx)});
    auto m = a.template mutable_unchecked<2>();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) m(j, i) = v[g.index(i, j)];
    return a;
}

py::dict trajectory_dict(const Trajectory& t, const Grid& g, const std::vector<std::vector<std::uint8_t>>& rasters) {
    py::dict d;
    d["times"] = t.times;
    d["stations"] = t.station_names;
    d["levels"] = matrix(t.levels, t.station_names.size());
    std::vector<std::vector<double>> wsr;
    for (const auto& w : t.wsr) wsr.emplace_back(w.begin(), w.end());
    d["wsr"] = matrix(wsr, kFloodplainZones);
    py::list masks;
    for (const auto& r : rasters) masks.append(grid_array(g, r));
    d["extents"] = masks;
    return d;
}

py::list observation_list(const ObservationSet& obs) {
    py::list out;
    for (const auto& o : obs) {
        py::dict d;
        d["kind"] = to_string(o.kind);
        d["target"] = o.target;
        d["time"] = o.time;
        d["value"] = o.value;
        d["sigma"] = o.sigma;
        out.append(d);
    }
    return out;
}

py::list cycle_list(const std::vector<CycleDiagnostics>& cycles) {
    py::list out;
    for (const auto& c : cycles) {
        py::dict d;
        d["cycle"] = c.cycle;
        d["t_start"] = c.t_start;
        d["t_end"] = c.t_end;
        d["n_gauge"] = c.n_gauge;
        d["n_wsr"] = c.n_wsr;
        py::dict mf, sf, ma, sa;
        for (int j = 0; j < kControlSize; ++j) {
            const auto name = control_entry_name(j);
            mf[py::str(name)] = c.mean_f[j];
            sf[py::str(name)] = c.std_f[j];
            ma[py::str(name)] = c.mean_a[j];
            sa[py::str(name)] = c.std_a[j];
        }
        d["mean_forecast"] = mf;
        d["std_forecast"] = sf;
        d["mean_analysis"] = ma;
        d["std_analysis"] = sa;
        out.append(d);
    }
    return out;
}

py::dict report_dict(const ScoreReport& r) {
    py::dict d;
    d["experiment"] = r.experiment;
    d["stations"] = r.stations;
    d["rmse"] = r.station_rmse;
    d["s1_times"] = r.s1_times;
    std::vector<double> c;
    for (const auto& x : r.csi) c.push_back(x.csi);
    d["csi"] = c;
    return d;
}

struct Pipeline {
    SuiteConfig cfg;
    Catchment catchment;
    TruthBundle truth;
    ObservationSet obs;
};

Pipeline prepare(const SuiteConfig& cfg) {
    cfg.validate();
    Pipeline p{cfg, build_catchment(cfg), {}, {}};
    p.truth = run_truth_stage(cfg, p.catchment);
    p.obs = synthesize_stage(cfg, p.truth.outputs.run.trajectory);
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Shallow-water flood model with ensemble Kalman filter twin experiments";
    m.attr("__version__") = code_version();

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<AlignmentError>(m, "AlignmentError", PyExc_LookupError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<SuiteConfig>(m, "Config", "Suite configuration (catchment, scenario, filter, experiments)")
        .def_static("default", &SuiteConfig::desk_default, "Built-in desk catchment and standard experiments")
        .def_static("from_yaml", &parse_config, py::arg("text"))
        .def_static("load", &load_config, py::arg("path"))
        .def("to_yaml", &dump_config)
        .def("hash", &config_hash)
        .def("validate", &SuiteConfig::validate)
        .def_readwrite("seed", &SuiteConfig::seed)
        .def_readwrite("threads", &SuiteConfig::threads)
        .def_property_readonly("experiments",
                               [](const SuiteConfig& c) {
                                   std::vector<std::string> names;
                                   for (const auto& e : c.experiments) names.push_back(e.name);
                                   return names;
                               })
        .def("__repr__", [](const SuiteConfig& c) {
            return "<floodda.Config seed=" + std::to_string(c.seed) + " hash=" + config_hash(c) + ">";
        });

    m.def(
        "generate_catchment",
        [](const SuiteConfig& cfg) {
            const auto c = build_catchment(cfg);
            py::dict d;
            d["nx"] = c.grid.nx;
            d["ny"] = c.grid.ny;
            d["dx"] = c.grid.dx;
            d["dy"] = c.grid.dy;
            d["bed"] = grid_array(c.grid, c.grid.z_b);
            std::vector<std::uint8_t> kind(c.grid.size());
            for (std::size_t k = 0; k < kind.size(); ++k) kind[k] = static_cast<std::uint8_t>(c.grid.kind[k]);
            d["kind"] = grid_array(c.grid, kind);
            d["friction_zone"] = grid_array(c.grid, c.friction.zone_id);
            d["calibrated_Ks"] = std::vector<double>(c.friction.calibrated_Ks.begin(), c.friction.calibrated_Ks.end());
            py::list st;
            for (const auto& s : c.stations)
                st.append(py::make_tuple(s.name, c.grid.col(s.cell), c.grid.row(s.cell),
                                         s.role == StationRole::assimilated ? "assimilated" : "validation"));
            d["stations"] = st;
            return d;
        },
        py::arg("config"), "Synthetic catchment as numpy grids (row-major, shape (ny, nx))");

    m.def(
        "run_truth",
        [](const SuiteConfig& cfg) {
            py::gil_scoped_release release;
            const auto c = build_catchment(cfg);
            auto t = run_truth_stage(cfg, c);
            py::gil_scoped_acquire acquire;
            auto d = trajectory_dict(t.outputs.run.trajectory, c.grid, t.outputs.rasters);
            d["s1_times"] = cfg.scenario.s1_times;
            return d;
        },
        py::arg("config"), "Truth run: station levels, zone WSR and extents at the S1 times");

    m.def(
        "synthesize",
        [](const SuiteConfig& cfg) {
            py::gil_scoped_release release;
            auto p = prepare(cfg);
            py::gil_scoped_acquire acquire;
            return observation_list(p.obs);
        },
        py::arg("config"), "Synthetic gauge and WSR observations drawn from the truth run");

    m.def(
        "run_experiment",
        [](const SuiteConfig& cfg, const std::string& name, const std::filesystem::path& out_dir) {
            py::gil_scoped_release release;
            auto p = prepare(cfg);
            const auto& spec = cfg.experiment(name);
            auto e = run_experiment(cfg, spec, p.catchment, p.obs, out_dir);
            const auto reports = score_stage(cfg, p.catchment, p.truth, {e}, out_dir / "scores");
            py::gil_scoped_acquire acquire;
            auto d = trajectory_dict(e.trajectory, p.catchment.grid, e.rasters);
            d["cycles"] = cycle_list(e.cycles);
            d["score"] = report_dict(reports.front());
            return d;
        },
        py::arg("config"), py::arg("name"), py::arg("out_dir"),
        "Truth, synthesis and one experiment; outputs and scores are written under out_dir");

    m.def(
        "run_suite",
        [](const SuiteConfig& cfg, const std::filesystem::path& root) {
            py::gil_scoped_release release;
            auto res = run_suite(cfg, root);
            py::gil_scoped_acquire acquire;
            py::list out;
            for (const auto& r : res.reports) out.append(report_dict(r));
            return out;
        },
        py::arg("config"), py::arg("out_dir"), "Every stage and experiment, then scores; returns one report each");

    m.def("rmse", py::overload_cast<const std::vector<double>&, const std::vector<double>&>(&rmse), py::arg("a"),
          py::arg("b"));
    m.def(
        "csi",
        [](const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
           const std::vector<std::uint8_t>& active) {
            const auto r = csi(pred, truth, active);
            py::dict d;
            d["csi"] = r.csi;
            d["tp"] = r.counts.tp;
            d["fp"] = r.counts.fp;
            d["fn"] = r.counts.fn;
            d["tn"] = r.counts.tn;
            d["both_dry"] = r.both_dry;
            return d;
        },
        py::arg("predicted"), py::arg("truth"), py::arg("active") = std::vector<std::uint8_t>{});
    m.def("wsr_sigma", &wsr_sigma, py::arg("time"), py::arg("window_start"), py::arg("window_end"),
          py::arg("sigma_hi") = 0.2, py::arg("sigma_lo") = 0.1);
    m.def(
        "gauge_sigma", [](double level, double tau, double sigma_min) { return gauge_sigma(level, tau, sigma_min).sigma; },
        py::arg("level"), py::arg("tau") = 0.15, py::arg("sigma_min") = 0.01);
    m.def("default_output_root", &default_output_root);
}
