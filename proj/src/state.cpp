#include "floodda/state.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "floodda/errors.hpp"

namespace floodda {

HydraulicState dry_state(const Grid& grid, double t) {
    HydraulicState s;
    s.h.assign(grid.size(), 0.0);
    s.u.assign(grid.size(), 0.0);
    s.v.assign(grid.size(), 0.0);
    s.t = t;
    return s;
}

double total_volume(const Grid& grid, const HydraulicState& s) {
    double vol = 0.0;
    for (std::size_t c = 0; c < grid.size(); ++c)
        if (grid.active(c)) vol += s.h[c];
    return vol * grid.cell_area();
}

std::vector<double> free_surface(const Grid& grid, const HydraulicState& s) {
    std::vector<double> eta(grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) eta[c] = grid.z_b[c] + s.h[c];
    return eta;
}

namespace {
constexpr char kCheckpointMagic[8] = {'F', 'D', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const HydraulicState& s, const Grid& grid) {
    if (s.h.size() != grid.size()) throw IoError("checkpoint: state does not match grid");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    binio::put_magic(os, kCheckpointMagic, kCheckpointVersion);
    binio::put<std::int32_t>(os, grid.nx);
    binio::put<std::int32_t>(os, grid.ny);
    binio::put(os, s.t);
    binio::put_vec(os, s.h);
    binio::put_vec(os, s.u);
    binio::put_vec(os, s.v);
    if (!os) throw IoError("write failed: " + path.string());
}

HydraulicState read_checkpoint(const std::filesystem::path& path, const Grid& grid) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    binio::expect_magic(is, kCheckpointMagic, kCheckpointVersion);
    const auto nx = binio::get<std::int32_t>(is);
    const auto ny = binio::get<std::int32_t>(is);
    if (nx != grid.nx || ny != grid.ny) throw IoError("checkpoint grid " + std::to_string(nx) + "x" +
                                                      std::to_string(ny) + " does not match catchment");
    HydraulicState s;
    s.t = binio::get<double>(is);
    s.h = binio::get_vec<double>(is);
    s.u = binio::get_vec<double>(is);
    s.v = binio::get_vec<double>(is);
    if (s.h.size() != grid.size() || s.u.size() != grid.size() || s.v.size() != grid.size())
        throw IoError("checkpoint arrays do not match grid");
    return s;
}

}  // namespace floodda
