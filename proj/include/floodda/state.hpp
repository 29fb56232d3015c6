#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "floodda/catchment.hpp"

namespace floodda {

/// Depth and depth-averaged velocity per cell at one model instant.
struct HydraulicState {
    std::vector<double> h;
    std::vector<double> u;
    std::vector<double> v;
    double t = 0.0;

    bool operator==(const HydraulicState&) const = default;
};

HydraulicState dry_state(const Grid& grid, double t);
/// Sum of h * cell area over active cells.
double total_volume(const Grid& grid, const HydraulicState& s);
std::vector<double> free_surface(const Grid& grid, const HydraulicState& s);

/// Versioned binary checkpoint (row-major 64-bit floats) for exact restart.
void write_checkpoint(const std::filesystem::path& path, const HydraulicState& s, const Grid& grid);
HydraulicState read_checkpoint(const std::filesystem::path& path, const Grid& grid);

}  // namespace floodda
