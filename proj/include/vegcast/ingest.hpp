#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vegcast/types.hpp"

namespace vegcast {

/// Column names and tokens of the observation CSV. Defaults match
/// `pixel_id,region_id,date,ndvi,quality`.
struct CsvSchema {
    std::string pixel_column = "pixel_id";
    std::string region_column = "region_id";
    std::string date_column = "date";
    std::string value_column = "ndvi";
    std::string quality_column = "quality";
    std::string good_token = "good";
    std::string bad_token = "bad";
    /// Raw values are divided by this (e.g. 10000 for scaled-integer products).
    double value_scale = 1.0;
};

struct RegionSampleSet {
    std::string region_id;
    std::vector<WeeklySeries> pixel_series;
    std::size_t min_pixels_for_aggregate = 25;
};

/// Mean of all good samples in each slot's window; empty windows are gaps.
WeeklySeries composite_weekly(const ObservationSeries& obs, const TimeGrid& grid);

/// Per-slot mean over pixels with a present value; gap when fewer than
/// `min_pixels_for_aggregate` pixels contribute.
WeeklySeries aggregate_region(const RegionSampleSet& set);

/// Same rule as aggregate_region for an arbitrary stack of series on one grid.
WeeklySeries aggregate_mean(std::span<const WeeklySeries> series, std::size_t min_count);

/// One ObservationSeries per pixel, in order of first appearance, samples sorted by date.
std::vector<ObservationSeries> parse_observations(std::istream& in, const CsvSchema& schema = {});
std::vector<ObservationSeries> load_observations(const std::filesystem::path& path,
                                                 const CsvSchema& schema = {});

/// Grid covering every sample of every series.
TimeGrid grid_for(std::span<const ObservationSeries> series,
                  std::chrono::weekday anchor = std::chrono::Saturday);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(std::string_view text);

using RegionalSeries = std::map<std::string, WeeklySeries>;

/// `region_id,date,value` with an empty value for gaps.
void write_regional_csv(std::ostream& out, const RegionalSeries& series);
RegionalSeries read_regional_csv(std::istream& in);

void save_regional_csv(const std::filesystem::path& path, const RegionalSeries& series);
RegionalSeries load_regional_csv(const std::filesystem::path& path);

/// Splits one CSV line on commas (no quoting) and strips a trailing CR.
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace vegcast
