#include "floodda/enkf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "floodda/errors.hpp"
#include "floodda/rng.hpp"

namespace floodda {

std::array<double, kFloodplainZones> ControlVector::deltaH() const {
    std::array<double, kFloodplainZones> d{};
    for (int z = 0; z < kFloodplainZones; ++z) d[z] = deltaH(z);
    return d;
}

EffectiveParameters ControlVector::effective() const {
    EffectiveParameters p;
    for (int z = 0; z < kFrictionZones; ++z) p.Ks[z] = Ks(z);
    p.inflow_multiplier = a();
    return p;
}

ControlVector ControlVector::calibrated(const Catchment& c) {
    ControlVector v;
    for (int z = 0; z < kFrictionZones; ++z) v.x[z] = c.friction.calibrated_Ks[z];
    v.x[kIndexA] = 1.0;
    return v;
}

std::string control_entry_name(int index) {
    if (index < 0 || index >= kControlSize) throw ConfigError("control index out of range");
    if (index < kFrictionZones) return "Ks" + std::to_string(index);
    if (index == kIndexA) return "a";
    return "dH" + std::to_string(index - kIndexDeltaH + 1);
}

bool is_deltaH_entry(int index) { return index >= kIndexDeltaH && index < kControlSize; }

void clip_to_bounds(ControlVector& v, const ControlBounds& b, const ControlMask& mask) {
    for (int j = 0; j < kFrictionZones; ++j)
        if (mask[j]) v.x[j] = std::clamp(v.x[j], b.Ks_min, b.Ks_max);
    if (mask[kIndexA]) v.x[kIndexA] = std::clamp(v.x[kIndexA], b.a_min, b.a_max);
}

void PriorSpec::validate() const {
    for (int j = 0; j < kControlSize; ++j) {
        if (!std::isfinite(sigma[j]) || sigma[j] < 0.0)
            throw ConfigError("prior sigma for " + control_entry_name(j) + " must be finite and >= 0");
        if (!std::isfinite(mean.x[j])) throw ConfigError("prior mean for " + control_entry_name(j) + " is not finite");
    }
}

void CycleSchedule::validate() const {
    if (!(window > 0.0) || !(shift > 0.0) || !(spinup >= 0.0)) throw ConfigError("cycle schedule: non-positive length");
    if (shift > window) throw ConfigError("cycle schedule: shift exceeds window length");
    if (!(shift > spinup)) throw ConfigError("cycle schedule: spin-up must be shorter than the shift");
    if (!(tf > t0)) throw ConfigError("cycle schedule: empty event span");
}

int CycleSchedule::cycle_count() const {
    return static_cast<int>(std::ceil((tf - t0) / shift - 1e-9));
}

CycleWindow CycleSchedule::window_at(int k) const {
    if (k < 1 || k > cycle_count()) throw ConfigError("cycle index outside the schedule");
    CycleWindow w;
    w.cycle = k;
    w.t_start = t0 + (k - 1) * shift;
    w.t_end = std::min(w.t_start + window, tf);
    return w;
}

Ensemble initial_ensemble(const PriorSpec& prior, const HydraulicState& restart, int n_members) {
    if (n_members < 2) throw ConfigError("ensemble needs at least 2 members");
    Ensemble e;
    e.members.assign(static_cast<std::size_t>(n_members), EnsembleMember{prior.mean, restart});
    return e;
}

namespace {

struct MeanStd {
    std::array<double, kControlSize> mean{};
    std::array<double, kControlSize> std{};
};

// Population moments (1/N_e), consistent with the covariance estimate.
MeanStd moments(const std::vector<ControlVector>& members) {
    MeanStd m;
    const double n = static_cast<double>(members.size());
    for (const auto& v : members)
        for (int j = 0; j < kControlSize; ++j) m.mean[j] += v.x[j];
    for (int j = 0; j < kControlSize; ++j) m.mean[j] /= n;
    for (const auto& v : members)
        for (int j = 0; j < kControlSize; ++j) m.std[j] += (v.x[j] - m.mean[j]) * (v.x[j] - m.mean[j]);
    for (int j = 0; j < kControlSize; ++j) m.std[j] = std::sqrt(m.std[j] / n);
    return m;
}

}  // namespace

ForecastDraw forecast_controls(const PriorSpec& prior, const std::vector<ControlVector>* previous, int cycle,
                               bool deltaH_enabled, double lambda, std::uint64_t seed, int n_members,
                               const ControlBounds& bounds) {
    if (n_members < 2) throw ConfigError("ensemble needs at least 2 members");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
    prior.validate();
    const bool carry = cycle > 1 && previous != nullptr && !previous->empty();
    MeanStd prev;
    if (carry) prev = moments(*previous);

    ForecastDraw draw;
    for (int j = 0; j < kControlSize; ++j) {
        if (!prior.active[j] || (is_deltaH_entry(j) && !deltaH_enabled)) continue;
        draw.sigma[j] = carry ? lambda * prev.std[j] + (1.0 - lambda) * prior.sigma[j] : prior.sigma[j];
    }

    ControlMask mask = prior.active;
    draw.members.reserve(static_cast<std::size_t>(n_members));
    for (int i = 0; i < n_members; ++i) {
        auto rng = make_stream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(cycle),
                               StreamPurpose::control_perturbation);
        std::normal_distribution<double> normal(0.0, 1.0);
        ControlVector v = prior.mean;
        for (int j = 0; j < kControlSize; ++j) {
            const double theta = normal(rng);  // always drawn so streams do not depend on the mask
            if (is_deltaH_entry(j)) {
                v.x[j] = draw.sigma[j] > 0.0 ? draw.sigma[j] * theta : 0.0;
            } else if (prior.active[j]) {
                const double centre = carry ? prev.mean[j] : prior.mean.x[j];
                v.x[j] = centre + draw.sigma[j] * theta;
            }
        }
        clip_to_bounds(v, bounds, mask);
        draw.members.push_back(v);
    }
    return draw;
}

PerturbedObservations perturb_observations(const ObservationSet& obs, int n_members, std::uint64_t seed, int cycle) {
    if (n_members < 1) throw ConfigError("perturb_observations: no members");
    PerturbedObservations out;
    out.values.resize(static_cast<Eigen::Index>(obs.size()), n_members);
    for (int i = 0; i < n_members; ++i) {
        auto rng = make_stream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(cycle),
                               StreamPurpose::observation_perturbation);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t r = 0; r < obs.size(); ++r) {
            const auto& o = obs[r];
            if (!(o.sigma > 0.0)) throw ConfigError("perturb_observations: sigma must be positive");
            double v = o.value + o.sigma * normal(rng);
            if (o.kind == ObsKind::wsr && (v < 0.0 || v > 1.0)) {
                v = std::clamp(v, 0.0, 1.0);
                ++out.wsr_clipped;
            }
            out.values(static_cast<Eigen::Index>(r), i) = v;
        }
    }
    return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> covariances(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    if (X.cols() != Y.cols()) throw AlignmentError("covariances: member counts differ between X and Y");
    if (X.cols() < 1) throw ConfigError("covariances: empty ensemble");
    const double inv = 1.0 / static_cast<double>(X.cols());
    Eigen::MatrixXd Pxy = inv * X * Y.transpose();
    Eigen::MatrixXd Pyy = inv * Y * Y.transpose();
    return {std::move(Pxy), std::move(Pyy)};
}

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& Pxy, const Eigen::MatrixXd& Pyy, const Eigen::VectorXd& r) {
    if (Pyy.rows() != Pyy.cols() || Pxy.cols() != Pyy.rows() || r.size() != Pyy.rows())
        throw AlignmentError("kalman_gain: inconsistent matrix shapes");
    if (Pyy.rows() == 0) return Eigen::MatrixXd::Zero(Pxy.rows(), 0);
    Eigen::MatrixXd S = Pyy;
    S.diagonal() += r;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw NumericalError("singular innovation covariance (P_yy + R not positive definite)");
    // K S = Pxy with S symmetric  <=>  S K^T = Pxy^T
    Eigen::MatrixXd Kt = llt.solve(Pxy.transpose());
    return Kt.transpose();
}

std::vector<ControlVector> analysis_update(const std::vector<ControlVector>& forecast, const Eigen::MatrixXd& yo,
                                           const Eigen::MatrixXd& yf, const Eigen::MatrixXd& K,
                                           const ControlMask& mask, const ControlBounds& bounds) {
    const auto ne = static_cast<Eigen::Index>(forecast.size());
    if (yo.cols() != ne || yf.cols() != ne || yo.rows() != yf.rows() || K.cols() != yo.rows() ||
        K.rows() != kControlSize)
        throw AlignmentError("analysis_update: inconsistent shapes");
    std::vector<ControlVector> out = forecast;
    if (yo.rows() == 0) return out;
    for (Eigen::Index i = 0; i < ne; ++i) {
        const Eigen::VectorXd dx = K * (yo.col(i) - yf.col(i));
        auto& v = out[static_cast<std::size_t>(i)];
        for (int j = 0; j < kControlSize; ++j)
            if (mask[j]) v.x[j] += dx(j);
        clip_to_bounds(v, bounds, mask);
    }
    return out;
}

Eigen::MatrixXd anomalies(const Eigen::MatrixXd& M) {
    if (M.cols() == 0) return M;
    const Eigen::VectorXd mean = M.rowwise().mean();
    return M.colwise() - mean;
}

Eigen::MatrixXd controls_matrix(const std::vector<ControlVector>& members) {
    Eigen::MatrixXd X(kControlSize, static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i)
        for (int j = 0; j < kControlSize; ++j) X(j, static_cast<Eigen::Index>(i)) = members[i].x[j];
    return X;
}

void FilterSettings::validate() const {
    if (n_members < 2) throw ConfigError("ensemble needs at least 2 members");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
    if (!(wsr_sigma_hi > 0.0) || !(wsr_sigma_lo > 0.0)) throw ConfigError("WSR sigmas must be positive");
    if (!(output_interval > 0.0)) throw ConfigError("output interval must be positive");
    schedule.validate();
    prior.validate();
}

ObservationSet observations_in_window(const ObservationSet& all, const CycleWindow& w, double sigma_hi,
                                      double sigma_lo) {
    ObservationSet out;
    for (const auto& o : all) {
        if (!(o.time > w.t_start && o.time <= w.t_end)) continue;
        Observation c = o;
        if (c.kind == ObsKind::wsr) c.sigma = wsr_sigma(c.time, w.t_start, w.t_end, sigma_hi, sigma_lo);
        out.push_back(std::move(c));
    }
    return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

// Runs fn for every member; a failure is re-raised with the member index so the
// experiment aborts instead of silently dropping the member.
template <class Fn>
void for_each_member(std::size_t n, int threads, int cycle, const char* phase, Fn&& fn) {
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            fn(i);
        } catch (const NumericalError& e) {
            std::ostringstream msg;
            msg << "cycle " << cycle << " " << phase << ", member " << i << ": " << e.what();
            throw NumericalError(msg.str());
        }
    });
}

HydraulicState mean_state(const std::vector<const HydraulicState*>& states) {
    HydraulicState m = *states.front();
    const double inv = 1.0 / static_cast<double>(states.size());
    for (std::size_t c = 0; c < m.h.size(); ++c) {
        double h = 0.0, u = 0.0, v = 0.0;
        for (const auto* s : states) {
            h += s->h[c];
            u += s->u[c];
            v += s->v[c];
        }
        m.h[c] = h * inv;
        m.u[c] = u * inv;
        m.v[c] = v * inv;
    }
    return m;
}

}  // namespace

CycleOutcome run_cycle(Ensemble& ens, const Catchment& c, const ObservationSet& all_obs, const FilterSettings& st,
                       int k) {
    const auto& sch = st.schedule;
    const CycleWindow w = sch.window_at(k);
    const auto ne = ens.members.size();
    if (static_cast<int>(ne) != st.n_members) throw ConfigError("ensemble size differs from the filter settings");

    const ObservationSet obs = observations_in_window(all_obs, w, st.wsr_sigma_hi, st.wsr_sigma_lo);
    CycleOutcome out;
    auto& diag = out.diagnostics;
    diag.cycle = k;
    diag.t_start = w.t_start;
    diag.t_end = w.t_end;
    for (const auto& o : obs) (o.kind == ObsKind::wsr ? diag.n_wsr : diag.n_gauge)++;
    bool dh_active = false;
    for (int z = 0; z < kFloodplainZones; ++z) dh_active = dh_active || st.prior.active[kIndexDeltaH + z];
    diag.deltaH_enabled = dh_active && diag.n_wsr > 0;

    std::vector<ControlVector> previous;
    if (k > 1)
        for (const auto& m : ens.members) previous.push_back(m.controls);
    ForecastDraw draw = forecast_controls(st.prior, k > 1 ? &previous : nullptr, k, diag.deltaH_enabled, st.lambda,
                                          st.seed, st.n_members, st.bounds);
    diag.sigma_perturbation = draw.sigma;

    std::vector<double> obs_times;
    for (const auto& o : obs) obs_times.push_back(o.time);

    // Forecast: spin-up to t_start, apply deltaH, propagate over the window.
    std::vector<HydraulicState> start(ne);
    Eigen::MatrixXd yf(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(ne));
    for_each_member(ne, st.threads, k, "forecast", [&](std::size_t i) {
        const auto params = draw.members[i].effective();
        const auto& restart = ens.members[i].restart;
        if (restart.t > w.t_start) throw AlignmentError("restart state lies after the window start");
        if (restart.t < w.t_start) {
            RunRequest spin;
            spin.t_end = w.t_start;
            spin.output_interval = sch.spinup > 0.0 ? sch.spinup : st.output_interval;
            spin.h_wet = st.h_wet;
            start[i] = run(restart, c, ParameterSchedule(params), spin, st.solver).final_state;
        } else {
            start[i] = restart;
        }
        HydraulicState s0 = start[i];
        if (diag.deltaH_enabled)
            s0 = apply_state_correction(s0, c, draw.members[i].deltaH(), st.solver.h_dry).state;
        RunRequest req;
        req.t_end = w.t_end;
        req.record_times = obs_times;
        req.output_interval = st.output_interval;
        req.h_wet = st.h_wet;
        const auto res = run(s0, c, ParameterSchedule(params), req, st.solver);
        const auto y = model_equivalents(res.trajectory, obs, st.bias);
        for (std::size_t r = 0; r < y.size(); ++r)
            yf(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = y[r];
    });

    // Analysis in control space.
    ControlMask mask = st.prior.active;
    if (!diag.deltaH_enabled)
        for (int z = 0; z < kFloodplainZones; ++z) mask[kIndexDeltaH + z] = false;
    std::vector<ControlVector> analysis = draw.members;
    if (!obs.empty()) {
        const Eigen::MatrixXd X = anomalies(controls_matrix(draw.members));
        const Eigen::MatrixXd Y = anomalies(yf);
        const auto [Pxy, Pyy] = covariances(X, Y);
        Eigen::VectorXd r(static_cast<Eigen::Index>(obs.size()));
        Eigen::VectorXd yo(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t q = 0; q < obs.size(); ++q) {
            r(static_cast<Eigen::Index>(q)) = obs[q].sigma * obs[q].sigma;
            yo(static_cast<Eigen::Index>(q)) = obs[q].value;
        }
        const Eigen::MatrixXd K = kalman_gain(Pxy, Pyy, r);
        const auto pert = perturb_observations(obs, st.n_members, st.seed, k);
        diag.wsr_clipped = pert.wsr_clipped;
        analysis = analysis_update(draw.members, pert.values, yf, K, mask, st.bounds);
        diag.innovation_rms_f = std::sqrt((yo - yf.rowwise().mean()).squaredNorm() / static_cast<double>(obs.size()));
    }

    // Re-propagation with analyzed controls from the same post-spin-up state.
    const bool last = k == sch.cycle_count();
    const double t_stop = std::min(w.t_start + sch.shift, sch.tf);
    const double t_ckpt = w.t_start + sch.shift - sch.spinup;
    std::vector<double> snaps;
    for (double t : st.snapshot_times)
        if (t >= w.t_start && (t < t_stop || (last && t == t_stop))) snaps.push_back(t);
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());

    std::vector<RunResult> results(ne);
    for_each_member(ne, st.threads, k, "analysis", [&](std::size_t i) {
        HydraulicState s0 = start[i];
        if (diag.deltaH_enabled) s0 = apply_state_correction(s0, c, analysis[i].deltaH(), st.solver.h_dry).state;
        RunRequest req;
        req.t_end = t_stop;
        req.record_initial = true;
        req.output_interval = st.output_interval;
        req.snapshot_times = snaps;
        req.h_wet = st.h_wet;
        if (!last) req.checkpoint_times = {t_ckpt};
        results[i] = run(s0, c, ParameterSchedule(analysis[i].effective()), req, st.solver);
    });

    if (!st.checkpoint_dir.empty() && !last) {
        const auto dir = st.checkpoint_dir / std::to_string(k);
        std::filesystem::create_directories(dir);
        for (std::size_t i = 0; i < ne; ++i)
            write_checkpoint(dir / ("member_" + std::to_string(i) + ".ckpt"), results[i].trajectory.checkpoints.front(),
                             c.grid);
    }
    for (std::size_t i = 0; i < ne; ++i) {
        ens.members[i].controls = analysis[i];
        if (!last) ens.members[i].restart = results[i].trajectory.checkpoints.front();
    }
    ens.cycle = k;

    // Ensemble-mean diagnostics.
    const auto& ref = results.front().trajectory;
    auto& mt = out.mean_trajectory;
    mt.station_names = ref.station_names;
    const double inv = 1.0 / static_cast<double>(ne);
    for (std::size_t q = 0; q < ref.times.size(); ++q) {
        if (!(ref.times[q] < t_stop || last)) continue;
        mt.times.push_back(ref.times[q]);
        std::vector<double> lv(ref.station_names.size(), 0.0);
        std::array<double, kFloodplainZones> wz{};
        for (const auto& res : results) {
            for (std::size_t s = 0; s < lv.size(); ++s) lv[s] += res.trajectory.levels[q][s];
            for (int z = 0; z < kFloodplainZones; ++z) wz[z] += res.trajectory.wsr[q][z];
        }
        for (auto& l : lv) l *= inv;
        for (auto& x : wz) x *= inv;
        mt.levels.push_back(std::move(lv));
        mt.wsr.push_back(wz);
    }
    for (std::size_t q = 0; q < snaps.size(); ++q) {
        std::vector<const HydraulicState*> states;
        for (const auto& res : results) states.push_back(&res.trajectory.snapshots[q]);
        mt.snapshots.push_back(mean_state(states));
    }

    const auto mf = moments(draw.members);
    const auto ma = moments(analysis);
    diag.mean_f = mf.mean;
    diag.std_f = mf.std;
    diag.mean_a = ma.mean;
    diag.std_a = ma.std;
    diag.forecast = std::move(draw.members);
    diag.analysis = std::move(analysis);
    return out;
}

FilterResult run_filter(const Catchment& c, const HydraulicState& restart, const ObservationSet& obs,
                        const FilterSettings& st) {
    st.validate();
    const double expected = st.schedule.t0 - st.schedule.spinup;
    if (restart.t != expected) {
        std::ostringstream msg;
        msg << "filter restart state at t=" << restart.t << " s; expected t0 - spinup = " << expected << " s";
        throw AlignmentError(msg.str());
    }
    for (const auto& o : obs) validate_observation(o);
    Ensemble ens = initial_ensemble(st.prior, restart, st.n_members);
    FilterResult out;
    const int n = st.schedule.cycle_count();
    for (int k = 1; k <= n; ++k) {
        auto oc = run_cycle(ens, c, obs, st, k);
        auto& mt = out.mean_trajectory;
        if (mt.station_names.empty()) mt.station_names = oc.mean_trajectory.station_names;
        auto& t = oc.mean_trajectory;
        mt.times.insert(mt.times.end(), t.times.begin(), t.times.end());
        mt.levels.insert(mt.levels.end(), t.levels.begin(), t.levels.end());
        mt.wsr.insert(mt.wsr.end(), t.wsr.begin(), t.wsr.end());
        for (auto& s : t.snapshots) mt.snapshots.push_back(std::move(s));
        out.cycles.push_back(std::move(oc.diagnostics));
    }
    return out;
}

void write_cycle_diagnostics_csv(const std::filesystem::path& path, const std::vector<CycleDiagnostics>& cycles) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "cycle,entry,mean_f,std_f,mean_a,std_a\n";
    char buf[160];
    for (const auto& d : cycles) {
        for (int j = 0; j < kControlSize; ++j) {
            std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", d.cycle, control_entry_name(j).c_str(),
                          d.mean_f[j], d.std_f[j], d.mean_a[j], d.std_a[j]);
            os << buf;
        }
    }
}

std::vector<CycleDiagnostics> read_cycle_diagnostics_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    std::vector<CycleDiagnostics> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[6];
        for (auto& x : f)
            if (!std::getline(ss, x, ',')) throw IoError("malformed line in " + path.string());
        const int cycle = std::stoi(f[0]);
        if (out.empty() || out.back().cycle != cycle) {
            out.emplace_back();
            out.back().cycle = cycle;
        }
        int j = -1;
        for (int q = 0; q < kControlSize; ++q)
            if (control_entry_name(q) == f[1]) j = q;
        if (j < 0) throw IoError("unknown control entry '" + f[1] + "' in " + path.string());
        auto& d = out.back();
        d.mean_f[j] = std::stod(f[2]);
        d.std_f[j] = std::stod(f[3]);
        d.mean_a[j] = std::stod(f[4]);
        d.std_a[j] = std::stod(f[5]);
    }
    return out;
}

}  // namespace floodda
