#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace floodda {

/// Model time is seconds relative to the event origin; wall-clock stamps are
/// produced by adding the origin's Unix epoch seconds.
struct TimeAxis {
    std::int64_t origin_epoch = 0;

    std::string iso(double model_seconds) const;
    double from_iso(std::string_view stamp) const;
};

std::string format_iso8601(std::int64_t epoch_seconds);
/// Accepts `YYYY-MM-DDTHH:MM:SS` with an optional trailing `Z`.
std::int64_t parse_iso8601(std::string_view stamp);

constexpr double hours(double h) { return h * 3600.0; }

}  // namespace floodda
