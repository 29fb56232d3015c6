#include "floodda/timeutil.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>

#include "floodda/errors.hpp"

namespace floodda {

std::string format_iso8601(std::int64_t epoch_seconds) {
    std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::int64_t parse_iso8601(std::string_view stamp) {
    std::string s(stamp);
    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                    &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &consumed) != 6) {
        throw ConfigError("malformed ISO-8601 timestamp: '" + s + "'");
    }
    const std::string rest = s.substr(static_cast<std::size_t>(consumed));
    if (!(rest.empty() || rest == "Z")) {
        throw ConfigError("unsupported timestamp suffix in '" + s + "' (UTC only)");
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return static_cast<std::int64_t>(timegm(&tm));
}

std::string TimeAxis::iso(double model_seconds) const {
    return format_iso8601(origin_epoch + static_cast<std::int64_t>(std::llround(model_seconds)));
}

double TimeAxis::from_iso(std::string_view stamp) const {
    return static_cast<double>(parse_iso8601(stamp) - origin_epoch);
}

}  // namespace floodda
