#include "floodda/swe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "floodda/errors.hpp"

namespace floodda {

EffectiveParameters EffectiveParameters::calibrated(const Catchment& c) {
    EffectiveParameters p;
    p.Ks = c.friction.calibrated_Ks;
    p.inflow_multiplier = 1.0;
    return p;
}

ParameterSchedule::ParameterSchedule(const EffectiveParameters& constant) : times_{0.0}, values_{constant} {}

ParameterSchedule ParameterSchedule::piecewise_linear(std::vector<double> times, std::vector<EffectiveParameters> values) {
    if (times.empty() || times.size() != values.size()) throw ConfigError("parameter schedule: empty or ragged knots");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw ConfigError("parameter schedule: knot times must increase");
    ParameterSchedule s;
    s.times_ = std::move(times);
    s.values_ = std::move(values);
    return s;
}

EffectiveParameters ParameterSchedule::at(double t) const {
    if (values_.empty()) throw ConfigError("parameter schedule is empty");
    if (values_.size() == 1 || t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
    const auto& a = values_[k - 1];
    const auto& b = values_[k];
    EffectiveParameters p;
    for (int z = 0; z < kFrictionZones; ++z) p.Ks[z] = a.Ks[z] + w * (b.Ks[z] - a.Ks[z]);
    p.inflow_multiplier = a.inflow_multiplier + w * (b.inflow_multiplier - a.inflow_multiplier);
    return p;
}

namespace {

struct FaceFlux {
    double mass = 0.0;
    double normal = 0.0;   // momentum along the face normal
    double tangent = 0.0;  // momentum along the face
    double corr_l = 0.0;   // hydrostatic-reconstruction pressure correction, left cell
    double corr_r = 0.0;   // ... right cell
};

/// First-order Rusanov flux with hydrostatic reconstruction of the bed step.
inline FaceFlux hr_rusanov(double g, double hl, double ul, double vl, double zl, double hr, double ur, double vr,
                           double zr) {
    const double zs = std::max(zl, zr);
    const double hls = std::max(0.0, hl + zl - zs);
    const double hrs = std::max(0.0, hr + zr - zs);
    const double a = std::max(std::abs(ul) + std::sqrt(g * hls), std::abs(ur) + std::sqrt(g * hrs));
    const double ql = hls * ul;
    const double qr = hrs * ur;
    FaceFlux f;
    f.mass = 0.5 * (ql + qr) - 0.5 * a * (hrs - hls);
    f.normal = 0.5 * (ql * ul + 0.5 * g * hls * hls + qr * ur + 0.5 * g * hrs * hrs) - 0.5 * a * (qr - ql);
    f.tangent = 0.5 * (ql * vl + qr * vr) - 0.5 * a * (hrs * vr - hls * vl);
    f.corr_l = 0.5 * g * (hl * hl - hls * hls);
    f.corr_r = 0.5 * g * (hr * hr - hrs * hrs);
    return f;
}

class Solver {
public:
    Solver(const Catchment& c, const SolverSettings& st) : c_(c), g_(c.grid), st_(st) {
        const auto n = g_.size();
        is_inflow_.assign(n, 0);
        is_outflow_.assign(n, 0);
        for (auto cell : c.bc.inflow_cells) is_inflow_[cell] = 1;
        for (auto cell : c.bc.outflow_cells) is_outflow_[cell] = 1;
        fx_.resize(static_cast<std::size_t>(g_.nx + 1) * g_.ny);
        fy_.resize(static_cast<std::size_t>(g_.nx) * (g_.ny + 1));
        u_.resize(n);
        v_.resize(n);
        hu_.resize(n);
        hv_.resize(n);
        out_.resize(n);
        theta_.resize(n);
        rh_.resize(n);
        ru_.resize(n);
        rv_.resize(n);
        q_in_.assign(n, 0.0);
        q_out_.assign(n, 0.0);
        has_forcing_ = !st.forcing.p_atm.empty() || !st.forcing.wind_x.empty() || !st.forcing.wind_y.empty();
        if (!st.forcing.p_atm.empty() && st.forcing.p_atm.size() != n) throw ConfigError("forcing: p_atm size mismatch");
        if (!st.forcing.wind_x.empty() && st.forcing.wind_x.size() != n) throw ConfigError("forcing: wind_x size mismatch");
        if (!st.forcing.wind_y.empty() && st.forcing.wind_y.size() != n) throw ConfigError("forcing: wind_y size mismatch");
        if (!(st.cfl > 0.0 && st.cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
    }

    double stable_dt(const HydraulicState& s, double cfl) const {
        const double g = st_.constants.g;
        double smax = 0.0;
        for (std::size_t c = 0; c < g_.size(); ++c) {
            if (!g_.active(c) || s.h[c] < st_.h_dry) continue;
            smax = std::max(smax, std::abs(s.u[c]) + std::abs(s.v[c]) + std::sqrt(g * s.h[c]));
        }
        if (smax <= 0.0) return st_.dt_max;
        return std::min(st_.dt_max, cfl * std::min(g_.dx, g_.dy) / smax);
    }

    void advance(HydraulicState& s, const EffectiveParameters& p, double dt, FluxLedger* ledger) {
        const auto n = g_.size();
        const double g = st_.constants.g;
        const double hdry = st_.h_dry;
        const int nx = g_.nx;
        const int ny = g_.ny;
        const auto& z = g_.z_b;

        for (std::size_t c = 0; c < n; ++c) {
            const bool wet = g_.active(c) && s.h[c] >= hdry;
            u_[c] = wet ? s.u[c] : 0.0;
            v_[c] = wet ? s.v[c] : 0.0;
            hu_[c] = s.h[c] * u_[c];
            hv_[c] = s.h[c] * v_[c];
        }

        boundary_discharges(s, p);

        // x faces: face i sits between cells i-1 and i.
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                FaceFlux& f = fx_[static_cast<std::size_t>(j) * (nx + 1) + i];
                f = FaceFlux{};
                const bool la = i > 0 && g_.active(g_.index(i - 1, j));
                const bool ra = i < nx && g_.active(g_.index(i, j));
                if (la && ra) {
                    const auto l = g_.index(i - 1, j);
                    const auto r = g_.index(i, j);
                    f = hr_rusanov(g, s.h[l], u_[l], v_[l], z[l], s.h[r], u_[r], v_[r], z[r]);
                } else if (la) {
                    const auto l = g_.index(i - 1, j);
                    if (i == nx && is_outflow_[l]) {
                        f = open_face(g, s.h[l], u_[l], v_[l], q_out_[l]);
                    } else {
                        f = wall_face(g, s.h[l], u_[l], +1.0);
                    }
                } else if (ra) {
                    const auto r = g_.index(i, j);
                    if (i == 0 && is_inflow_[r]) {
                        f = open_face(g, s.h[r], u_[r], 0.0, q_in_[r]);
                    } else {
                        f = wall_face(g, s.h[r], u_[r], -1.0);
                    }
                }
            }
        }
        // y faces: face j sits between cells (i, j-1) and (i, j); normal is +y.
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                FaceFlux& f = fy_[static_cast<std::size_t>(j) * nx + i];
                f = FaceFlux{};
                const bool la = j > 0 && g_.active(g_.index(i, j - 1));
                const bool ra = j < ny && g_.active(g_.index(i, j));
                if (la && ra) {
                    const auto l = g_.index(i, j - 1);
                    const auto r = g_.index(i, j);
                    f = hr_rusanov(g, s.h[l], v_[l], u_[l], z[l], s.h[r], v_[r], u_[r], z[r]);
                } else if (la) {
                    const auto l = g_.index(i, j - 1);
                    f = wall_face(g, s.h[l], v_[l], +1.0);
                } else if (ra) {
                    const auto r = g_.index(i, j);
                    f = wall_face(g, s.h[r], v_[r], -1.0);
                }
            }
        }

        // Draining-time limiter: no cell may export more water than it holds.
        std::fill(out_.begin(), out_.end(), 0.0);
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                const auto& f = fx_[static_cast<std::size_t>(j) * (nx + 1) + i];
                if (f.mass > 0.0 && i > 0) out_[g_.index(i - 1, j)] += f.mass * g_.dy;
                if (f.mass < 0.0 && i < nx) out_[g_.index(i, j)] -= f.mass * g_.dy;
            }
        }
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const auto& f = fy_[static_cast<std::size_t>(j) * nx + i];
                if (f.mass > 0.0 && j > 0) out_[g_.index(i, j - 1)] += f.mass * g_.dx;
                if (f.mass < 0.0 && j < ny) out_[g_.index(i, j)] -= f.mass * g_.dx;
            }
        }
        const double area = g_.cell_area();
        for (std::size_t c = 0; c < n; ++c) {
            const double export_vol = out_[c] * dt;
            const double stock = s.h[c] * area;
            theta_[c] = export_vol > stock ? stock / export_vol : 1.0;
        }

        std::fill(rh_.begin(), rh_.end(), 0.0);
        std::fill(ru_.begin(), ru_.end(), 0.0);
        std::fill(rv_.begin(), rv_.end(), 0.0);
        double inflow = 0.0;
        double outflow = 0.0;
        const double idx = 1.0 / g_.dx;
        const double idy = 1.0 / g_.dy;
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i <= nx; ++i) {
                const auto& f = fx_[static_cast<std::size_t>(j) * (nx + 1) + i];
                const bool has_l = i > 0 && g_.active(g_.index(i - 1, j));
                const bool has_r = i < nx && g_.active(g_.index(i, j));
                double scale = 1.0;
                if (f.mass > 0.0 && has_l) scale = theta_[g_.index(i - 1, j)];
                if (f.mass < 0.0 && has_r) scale = theta_[g_.index(i, j)];
                if (has_l) {
                    const auto l = g_.index(i - 1, j);
                    rh_[l] -= scale * f.mass * idx;
                    ru_[l] -= (scale * f.normal + f.corr_l) * idx;
                    rv_[l] -= scale * f.tangent * idx;
                    if (!has_r) outflow += scale * f.mass * g_.dy;
                }
                if (has_r) {
                    const auto r = g_.index(i, j);
                    rh_[r] += scale * f.mass * idx;
                    ru_[r] += (scale * f.normal + f.corr_r) * idx;
                    rv_[r] += scale * f.tangent * idx;
                    if (!has_l) inflow += scale * f.mass * g_.dy;
                }
            }
        }
        for (int j = 0; j <= ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const auto& f = fy_[static_cast<std::size_t>(j) * nx + i];
                const bool has_l = j > 0 && g_.active(g_.index(i, j - 1));
                const bool has_r = j < ny && g_.active(g_.index(i, j));
                double scale = 1.0;
                if (f.mass > 0.0 && has_l) scale = theta_[g_.index(i, j - 1)];
                if (f.mass < 0.0 && has_r) scale = theta_[g_.index(i, j)];
                if (has_l) {
                    const auto l = g_.index(i, j - 1);
                    rh_[l] -= scale * f.mass * idy;
                    rv_[l] -= (scale * f.normal + f.corr_l) * idy;
                    ru_[l] -= scale * f.tangent * idy;
                }
                if (has_r) {
                    const auto r = g_.index(i, j);
                    rh_[r] += scale * f.mass * idy;
                    rv_[r] += (scale * f.normal + f.corr_r) * idy;
                    ru_[r] += scale * f.tangent * idy;
                }
            }
        }

        if (has_forcing_) add_atmospheric(s);
        if (st_.constants.nu_e > 0.0) add_diffusion(s);

        for (std::size_t c = 0; c < n; ++c) {
            if (!g_.active(c)) continue;
            double h = s.h[c] + dt * rh_[c];
            if (h < 0.0) h = 0.0;  // round-off only; the limiter bounds exports by the stock
            double qx = hu_[c] + dt * ru_[c];
            double qy = hv_[c] + dt * rv_[c];
            double u = 0.0;
            double v = 0.0;
            if (h >= hdry) {
                u = qx / h;
                v = qy / h;
                const double speed = std::sqrt(u * u + v * v);
                if (speed > 0.0) {
                    // Implicit Strickler drag: solve c*m^2 + m = m* for the new speed m.
                    const double ks = p.Ks[c_.friction.zone_id[c]];
                    const double coef = dt * g / (ks * ks * h * std::cbrt(h));
                    const double m = 2.0 * speed / (1.0 + std::sqrt(1.0 + 4.0 * coef * speed));
                    const double r = m / speed;
                    u *= r;
                    v *= r;
                }
            }
            if (!std::isfinite(h) || !std::isfinite(u) || !std::isfinite(v)) {
                std::ostringstream msg;
                msg << "numerical blow-up at cell (" << g_.col(c) << ", " << g_.row(c) << ") at t=" << s.t << " s";
                throw NumericalError(msg.str());
            }
            s.h[c] = h;
            s.u[c] = u;
            s.v[c] = v;
        }
        s.t += dt;

        if (ledger) {
            ledger->inflow_volume += dt * inflow;
            ledger->outflow_volume += dt * outflow;
            if (below_datum_) ++ledger->below_datum_steps;
        }
    }

private:
    FaceFlux wall_face(double g, double h, double un, double side) const {
        // Mirror ghost state; side = +1 when the wall lies on the cell's high side.
        FaceFlux f;
        const double a = std::abs(un) + std::sqrt(g * h);
        f.normal = h * un * un + 0.5 * g * h * h + side * a * h * un;
        return f;
    }

    FaceFlux open_face(double g, double h, double un, double ut, double q) const {
        FaceFlux f;
        f.mass = q;
        const double he = std::max(h, 0.1);
        f.normal = q * q / he + 0.5 * g * h * h;
        f.tangent = q * ut;
        (void)un;
        return f;
    }

    void boundary_discharges(const HydraulicState& s, const EffectiveParameters& p) {
        const auto& bc = c_.bc;
        below_datum_ = false;
        if (!bc.inflow_cells.empty()) {
            const double q_total = hydrograph_at(bc, s.t) * p.inflow_multiplier;
            distribute(bc.inflow_cells, s, q_total, q_in_);
        }
        if (!bc.outflow_cells.empty()) {
            double stage = 0.0;
            int wet = 0;
            for (auto cell : bc.outflow_cells) {
                if (s.h[cell] >= st_.h_dry) {
                    stage += g_.z_b[cell] + s.h[cell];
                    ++wet;
                }
            }
            double q_total = 0.0;
            if (wet > 0) {
                const auto r = rating_curve_discharge(bc.downstream, stage / wet);
                q_total = r.discharge;
                below_datum_ = r.below_datum;
            }
            distribute(bc.outflow_cells, s, q_total, q_out_);
            for (auto cell : bc.outflow_cells)
                if (s.h[cell] < st_.h_dry) q_out_[cell] = 0.0;
        }
    }

    // Split a total discharge over boundary cells by conveyance h^(5/3);
    // returns unit-width discharges.
    void distribute(const std::vector<std::size_t>& cells, const HydraulicState& s, double q_total,
                    std::vector<double>& unit_q) const {
        double wsum = 0.0;
        for (auto cell : cells) wsum += std::pow(s.h[cell], 5.0 / 3.0);
        for (auto cell : cells) {
            const double w = wsum > 0.0 ? std::pow(s.h[cell], 5.0 / 3.0) / wsum : 1.0 / static_cast<double>(cells.size());
            unit_q[cell] = q_total * w / g_.dy;
        }
    }

    void add_atmospheric(const HydraulicState& s) {
        const auto& f = st_.forcing;
        const auto& pc = st_.constants;
        for (int j = 0; j < g_.ny; ++j) {
            for (int i = 0; i < g_.nx; ++i) {
                const auto c = g_.index(i, j);
                if (!g_.active(c) || s.h[c] < st_.h_dry) continue;
                if (!f.p_atm.empty()) {
                    ru_[c] -= s.h[c] / pc.rho_w * gradient(f.p_atm, i, j, 1, 0, g_.dx);
                    rv_[c] -= s.h[c] / pc.rho_w * gradient(f.p_atm, i, j, 0, 1, g_.dy);
                }
                const double wx = f.wind_x.empty() ? 0.0 : f.wind_x[c];
                const double wy = f.wind_y.empty() ? 0.0 : f.wind_y[c];
                const double wmag = std::sqrt(wx * wx + wy * wy);
                // h * (1/h) rho_air/rho_w C_d U |U|: the depth cancels in momentum form.
                ru_[c] += pc.rho_air / pc.rho_w * pc.C_d * wx * wmag;
                rv_[c] += pc.rho_air / pc.rho_w * pc.C_d * wy * wmag;
            }
        }
    }

    double gradient(const std::vector<double>& f, int i, int j, int di, int dj, double d) const {
        const int n = di ? g_.nx : g_.ny;
        const int k = di ? i : j;
        const bool lo = k > 0 && g_.active(g_.index(i - di, j - dj));
        const bool hi = k < n - 1 && g_.active(g_.index(i + di, j + dj));
        const auto c = g_.index(i, j);
        if (lo && hi) return (f[g_.index(i + di, j + dj)] - f[g_.index(i - di, j - dj)]) / (2.0 * d);
        if (hi) return (f[g_.index(i + di, j + dj)] - f[c]) / d;
        if (lo) return (f[c] - f[g_.index(i - di, j - dj)]) / d;
        return 0.0;
    }

    void add_diffusion(const HydraulicState& s) {
        const double nu = st_.constants.nu_e;
        auto face = [&](std::size_t a, std::size_t b, double d) {
            if (!g_.active(a) || !g_.active(b) || s.h[a] < st_.h_dry || s.h[b] < st_.h_dry) return;
            const double hf = 0.5 * (s.h[a] + s.h[b]);
            const double k = nu * hf / (d * d);
            const double du = u_[b] - u_[a];
            const double dv = v_[b] - v_[a];
            ru_[a] += k * du;
            ru_[b] -= k * du;
            rv_[a] += k * dv;
            rv_[b] -= k * dv;
        };
        for (int j = 0; j < g_.ny; ++j)
            for (int i = 0; i + 1 < g_.nx; ++i) face(g_.index(i, j), g_.index(i + 1, j), g_.dx);
        for (int j = 0; j + 1 < g_.ny; ++j)
            for (int i = 0; i < g_.nx; ++i) face(g_.index(i, j), g_.index(i, j + 1), g_.dy);
    }

    const Catchment& c_;
    const Grid& g_;
    SolverSettings st_;
    std::vector<std::uint8_t> is_inflow_, is_outflow_;
    std::vector<FaceFlux> fx_, fy_;
    std::vector<double> u_, v_, hu_, hv_, out_, theta_, rh_, ru_, rv_, q_in_, q_out_;
    bool has_forcing_ = false;
    bool below_datum_ = false;
};

void check_state_shape(const HydraulicState& s, const Grid& g) {
    if (s.h.size() != g.size() || s.u.size() != g.size() || s.v.size() != g.size())
        throw ConfigError("hydraulic state does not match the catchment grid");
}

}  // namespace

double stable_dt(const HydraulicState& s, const Catchment& c, double cfl, const SolverSettings& settings) {
    check_state_shape(s, c.grid);
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
    SolverSettings st = settings;
    st.cfl = cfl;
    return Solver(c, st).stable_dt(s, cfl);
}

HydraulicState step(const HydraulicState& s, const Catchment& c, const EffectiveParameters& p, double dt,
                    const SolverSettings& settings, FluxLedger* ledger) {
    check_state_shape(s, c.grid);
    if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
    HydraulicState next = s;
    Solver(c, settings).advance(next, p, dt, ledger);
    return next;
}

CorrectionResult apply_state_correction(const HydraulicState& s, const Catchment& c,
                                        const std::array<double, kFloodplainZones>& deltaH, double h_dry) {
    CorrectionResult out{s, 0};
    for (int z = 0; z < kFloodplainZones; ++z) {
        if (!std::isfinite(deltaH[z])) throw ConfigError("state correction: non-finite deltaH");
        if (deltaH[z] == 0.0) continue;
        for (auto cell : c.zones.masks[z]) {
            double& h = out.state.h[cell];
            if (h < h_dry) continue;
            const double shifted = h + deltaH[z];
            if (shifted <= 0.0) {
                h = 0.0;
                ++out.clamped_cells;
            } else {
                h = shifted;
            }
            if (h < h_dry) {
                out.state.u[cell] = 0.0;
                out.state.v[cell] = 0.0;
            }
        }
    }
    return out;
}

namespace {

void record(Trajectory& traj, const Catchment& c, const HydraulicState& s, double h_wet, double h_dry) {
    traj.times.push_back(s.t);
    std::vector<double> lv;
    lv.reserve(c.stations.size());
    for (const auto& st : c.stations) lv.push_back(gauge_level(c.grid, s, st, h_dry).level);
    traj.levels.push_back(std::move(lv));
    std::array<double, kFloodplainZones> w{};
    for (int z = 0; z < kFloodplainZones; ++z)
        w[z] = c.zones.masks[z].empty() ? 0.0 : wet_surface_ratio(c.grid, s, c.zones, z, h_wet);
    traj.wsr.push_back(w);
}

bool contains(const std::vector<double>& sorted, double t) {
    return std::binary_search(sorted.begin(), sorted.end(), t);
}

}  // namespace

RunResult run(const HydraulicState& initial, const Catchment& c, const ParameterSchedule& params,
              const RunRequest& req, const SolverSettings& settings) {
    check_state_shape(initial, c.grid);
    const double t0 = initial.t;
    if (req.t_end < t0) throw ConfigError("run: t_end precedes the initial state time");
    for (std::size_t k = 0; k < req.checkpoint_times.size(); ++k) {
        const double tc = req.checkpoint_times[k];
        if (tc <= t0 || tc > req.t_end) throw ConfigError("run: checkpoint time outside (t0, t_end]");
        if (k > 0 && !(tc > req.checkpoint_times[k - 1])) throw ConfigError("run: checkpoint times must be sorted");
    }
    if (!(req.output_interval > 0.0)) throw ConfigError("run: output interval must be positive");

    RunResult res;
    res.final_state = initial;
    for (const auto& st : c.stations) res.trajectory.station_names.push_back(st.name);
    if (req.record_initial) record(res.trajectory, c, res.final_state, req.h_wet, settings.h_dry);

    auto in_span = [&](double t) { return t > t0 && t <= req.t_end; };
    std::vector<double> outputs;
    for (double k = std::floor(t0 / req.output_interval) + 1.0;; k += 1.0) {
        const double t = k * req.output_interval;
        if (t > req.t_end) break;
        if (t > t0) outputs.push_back(t);
    }
    for (double t : req.record_times)
        if (in_span(t)) outputs.push_back(t);
    std::sort(outputs.begin(), outputs.end());
    outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());

    std::vector<double> snaps;
    bool snap_initial = false;
    for (double t : req.snapshot_times) {
        if (t == t0) snap_initial = true;
        if (in_span(t)) snaps.push_back(t);
    }
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
    if (snap_initial) res.trajectory.snapshots.push_back(initial);

    std::vector<TimedCorrection> corrections;
    for (const auto& tc : req.corrections)
        if (in_span(tc.time)) corrections.push_back(tc);
    std::sort(corrections.begin(), corrections.end(),
              [](const TimedCorrection& a, const TimedCorrection& b) { return a.time < b.time; });

    if (req.t_end == t0) return res;

    std::vector<double> stops = outputs;
    stops.insert(stops.end(), snaps.begin(), snaps.end());
    stops.insert(stops.end(), req.checkpoint_times.begin(), req.checkpoint_times.end());
    for (const auto& tc : corrections) stops.push_back(tc.time);
    stops.push_back(req.t_end);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    Solver solver(c, settings);
    HydraulicState& s = res.final_state;
    const auto wall_start = std::chrono::steady_clock::now();
    std::size_t next_correction = 0;
    try {
        for (double stop : stops) {
            while (s.t < stop) {
                const double remaining = stop - s.t;
                const double dt_stable = solver.stable_dt(s, settings.cfl);
                // Equal sub-steps so the last one lands exactly on the stop.
                const double nsub = std::ceil(remaining / dt_stable * (1.0 - 1e-12));
                const double dt = nsub <= 1.0 ? remaining : remaining / nsub;
                solver.advance(s, params.at(s.t), dt, &res.ledger);
                ++res.steps;
                if (nsub <= 1.0) s.t = stop;
            }
            while (next_correction < corrections.size() && corrections[next_correction].time == stop) {
                auto cr = apply_state_correction(s, c, corrections[next_correction].deltaH, settings.h_dry);
                s = std::move(cr.state);
                res.clamped_cells += cr.clamped_cells;
                ++next_correction;
            }
            if (contains(outputs, stop)) record(res.trajectory, c, s, req.h_wet, settings.h_dry);
            if (contains(snaps, stop)) res.trajectory.snapshots.push_back(s);
            if (contains(req.checkpoint_times, stop)) res.trajectory.checkpoints.push_back(s);
        }
    } catch (const NumericalError& e) {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
        std::ostringstream msg;
        msg << e.what() << " (after " << res.steps << " steps, " << wall << " s wall-clock)";
        throw NumericalError(msg.str());
    }
    return res;
}

HydraulicState normal_depth_state(const Catchment& c, const EffectiveParameters& p, double discharge, double t) {
    const auto& g = c.grid;
    HydraulicState s = dry_state(g, t);
    std::vector<int> channel_rows_per_col(g.nx, 0);
    for (std::size_t cell = 0; cell < g.size(); ++cell)
        if (g.kind[cell] == CellKind::channel) ++channel_rows_per_col[g.col(cell)];
    int first = -1;
    int last = -1;
    for (int i = 0; i < g.nx; ++i) {
        if (channel_rows_per_col[i] > 0) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first < 0 || last == first) throw ConfigError("normal depth: catchment has no channel reach");
    auto bed_at = [&](int i) {
        for (int j = 0; j < g.ny; ++j)
            if (g.kind[g.index(i, j)] == CellKind::channel) return g.z_b[g.index(i, j)];
        return 0.0;
    };
    const double slope = std::max((bed_at(first) - bed_at(last)) / ((last - first) * g.dx), 1e-6);
    for (std::size_t cell = 0; cell < g.size(); ++cell) {
        if (g.kind[cell] != CellKind::channel) continue;
        const double width = channel_rows_per_col[g.col(cell)] * g.dy;
        const double ks = p.Ks[c.friction.zone_id[cell]];
        const double h = std::pow(discharge / (ks * width * std::sqrt(slope)), 0.6);
        s.h[cell] = h;
        s.u[cell] = h > 0.0 ? discharge / (width * h) : 0.0;
    }
    return s;
}

}  // namespace floodda
