#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace floodda {

/// Arc/Info ASCII raster. `values` is row-major with row 0 the northernmost
/// row, the order in which the rows appear in the file.
struct AsciiGrid {
    int ncols = 0;
    int nrows = 0;
    double xllcorner = 0.0;
    double yllcorner = 0.0;
    double cellsize = 1.0;
    double nodata_value = -9999.0;
    std::vector<double> values;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * ncols + col]; }
    bool operator==(const AsciiGrid&) const = default;
};

void write_ascii_grid(std::ostream& os, const AsciiGrid& grid);
void write_ascii_grid(const std::filesystem::path& path, const AsciiGrid& grid);
AsciiGrid read_ascii_grid(std::istream& is);
AsciiGrid read_ascii_grid(const std::filesystem::path& path);

}  // namespace floodda
