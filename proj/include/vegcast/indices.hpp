#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>

#include "vegcast/types.hpp"

namespace vegcast {

inline constexpr int kWeeksPerYear = 52;
inline constexpr std::size_t kVci3mWindow = 12;

struct WeekStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
};

/// Per week-of-year (1..52, ISO week 53 folded into 52) NDVI statistics.
struct Climatology {
    std::array<WeekStats, kWeeksPerYear> weeks{};

    const WeekStats& week(int week_of_year) const { return weeks.at(static_cast<std::size_t>(week_of_year - 1)); }
};

/// Throws Error(InsufficientData) naming the first week with fewer than 2 values.
Climatology build_climatology(const WeeklySeries& series);

/// `week,min,max,mean` with one row per week.
void write_climatology_csv(std::ostream& out, const Climatology& clim);
Climatology read_climatology_csv(std::istream& in);

enum class DegenerateWeekPolicy {
    Error,     // max == min is an error
    Midpoint,  // map every value in that week to 50
};

struct VciResult {
    IndexSeries series;
    /// Values pushed back into [0, 100].
    std::size_t clipped = 0;
};

VciResult compute_vci(const WeeklySeries& ndvi, const Climatology& clim, const std::string& region_id = {},
                      DegenerateWeekPolicy policy = DegenerateWeekPolicy::Error);

/// 12-week trailing mean of present VCI values. A slot is a gap when the
/// current NDVI is absent, or when fewer than 12 slots of history exist.
IndexSeries compute_vci3m(const IndexSeries& vci, const WeeklySeries& ndvi);

IndexSeries compute_ndvi_anomaly(const WeeklySeries& ndvi, const Climatology& clim,
                                 const std::string& region_id = {});

}  // namespace vegcast
