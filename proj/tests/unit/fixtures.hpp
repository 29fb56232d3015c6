#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "floodda/catchment.hpp"
#include "floodda/state.hpp"

namespace fixtures {

using namespace floodda;

/// Closed rectangular basin with a bumpy bed, no open boundaries.
inline Catchment closed_basin(int nx = 24, int ny = 12, double dx = 25.0) {
    Catchment c;
    c.grid.nx = nx;
    c.grid.ny = ny;
    c.grid.dx = dx;
    c.grid.dy = dx;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            c.grid.z_b.push_back(0.4 * std::sin(0.7 * i) * std::cos(0.9 * j) + 0.02 * i);
            c.grid.kind.push_back(CellKind::floodplain);
            c.friction.zone_id.push_back(0);
        }
    c.friction.calibrated_Ks = {30, 30, 30, 30, 30, 30, 30};
    c.bc.upstream_hydrograph = {{-1e9, 1e9}, {0.0, 0.0}};
    c.bc.downstream = {1.0, 1.5, 0.0};
    return c;
}

/// Straight prismatic channel of one cell width with Strickler rating outflow.
inline Catchment uniform_channel(int nx, double dx, double width, double slope, double Ks, double Q) {
    Catchment c;
    c.grid.nx = nx;
    c.grid.ny = 1;
    c.grid.dx = dx;
    c.grid.dy = width;
    for (int i = 0; i < nx; ++i) {
        c.grid.z_b.push_back(slope * (nx - i - 0.5) * dx);
        c.grid.kind.push_back(CellKind::channel);
        c.friction.zone_id.push_back(1);
    }
    c.friction.calibrated_Ks = {Ks, Ks, Ks, Ks, Ks, Ks, Ks};
    c.bc.upstream_hydrograph = {{-1e9, 1e9}, {Q, Q}};
    c.bc.downstream = {Ks * width * std::sqrt(slope), 5.0 / 3.0, slope * 0.5 * dx};
    c.bc.inflow_cells = {0};
    c.bc.outflow_cells = {static_cast<std::size_t>(nx - 1)};
    return c;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("floodda_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixtures
