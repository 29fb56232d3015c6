#include "floodda/esri_ascii.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "floodda/errors.hpp"

namespace floodda {
namespace {

// Shortest representation that parses back to the same double.
std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(const std::string& tok) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw IoError("ascii grid: cannot parse value '" + tok + "'");
    }
    return v;
}

bool iequals(const std::string& a, const char* b) {
    std::size_t i = 0;
    for (; i < a.size() && b[i]; ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return i == a.size() && b[i] == '\0';
}

}  // namespace

void write_ascii_grid(std::ostream& os, const AsciiGrid& g) {
    if (g.values.size() != static_cast<std::size_t>(g.ncols) * g.nrows) {
        throw IoError("ascii grid: value count does not match ncols*nrows");
    }
    os << "ncols " << g.ncols << '\n'
       << "nrows " << g.nrows << '\n'
       << "xllcorner " << shortest(g.xllcorner) << '\n'
       << "yllcorner " << shortest(g.yllcorner) << '\n'
       << "cellsize " << shortest(g.cellsize) << '\n'
       << "NODATA_value " << shortest(g.nodata_value) << '\n';
    for (int r = 0; r < g.nrows; ++r) {
        for (int c = 0; c < g.ncols; ++c) {
            if (c) os << ' ';
            os << shortest(g.at(r, c));
        }
        os << '\n';
    }
}

void write_ascii_grid(const std::filesystem::path& path, const AsciiGrid& grid) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_ascii_grid(os, grid);
}

AsciiGrid read_ascii_grid(std::istream& is) {
    AsciiGrid g;
    bool have_nodata = false;
    std::string key;
    std::string val;
    // Five mandatory keys; NODATA_value is optional.
    for (int seen = 0; seen < 6; ++seen) {
        auto pos = is.tellg();
        if (!(is >> key)) throw IoError("ascii grid: truncated header");
        if (!std::isalpha(static_cast<unsigned char>(key[0]))) {
            is.seekg(pos);
            break;
        }
        if (!(is >> val)) throw IoError("ascii grid: missing value for " + key);
        if (iequals(key, "ncols")) {
            g.ncols = std::stoi(val);
        } else if (iequals(key, "nrows")) {
            g.nrows = std::stoi(val);
        } else if (iequals(key, "xllcorner") || iequals(key, "xllcenter")) {
            g.xllcorner = parse_double(val);
        } else if (iequals(key, "yllcorner") || iequals(key, "yllcenter")) {
            g.yllcorner = parse_double(val);
        } else if (iequals(key, "cellsize")) {
            g.cellsize = parse_double(val);
        } else if (iequals(key, "nodata_value")) {
            g.nodata_value = parse_double(val);
            have_nodata = true;
        } else {
            throw IoError("ascii grid: unknown header key '" + key + "'");
        }
    }
    (void)have_nodata;
    if (g.ncols <= 0 || g.nrows <= 0) throw IoError("ascii grid: non-positive dimensions");
    const std::size_t n = static_cast<std::size_t>(g.ncols) * g.nrows;
    g.values.reserve(n);
    std::string tok;
    while (g.values.size() < n && is >> tok) g.values.push_back(parse_double(tok));
    if (g.values.size() != n) throw IoError("ascii grid: expected " + std::to_string(n) + " values");
    return g;
}

AsciiGrid read_ascii_grid(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    return read_ascii_grid(is);
}

}  // namespace floodda
