#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vegcast {

using Date = std::chrono::sys_days;

/// Parses a `YYYY-MM-DD` date. Throws Error(ErrorCode::Parse) on malformed input.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// ISO-8601 week number (1..53) of the given date.
int iso_week(Date d);

/// Week-of-year used for climatologies: ISO week with week 53 folded into 52.
int week_of_year(Date d);

enum class ErrorCode {
    InvalidValue,
    InvalidInput,
    OutOfRange,
    Parse,
    Duplicate,
    InsufficientData,
    Degenerate,
    FitFailure,
    Conditioning,
    Config,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Regular weekly grid. Slot i is dated start + 7*i days and owns the
/// observation window [date(i) - 6 days, date(i)].
class TimeGrid {
public:
    static constexpr int kStepDays = 7;

    TimeGrid(Date start, std::size_t length);

    /// Smallest grid anchored on `anchor` whose windows cover [first, last].
    static TimeGrid covering(Date first, Date last,
                             std::chrono::weekday anchor = std::chrono::Saturday);

    Date start() const noexcept { return start_; }
    std::size_t length() const noexcept { return length_; }
    Date date(std::size_t slot) const;
    Date last_date() const { return date(length_ - 1); }

    /// Slot whose window contains `d`, if any.
    std::optional<std::size_t> slot_containing(Date d) const;

    /// Slot dated exactly `d`, if any.
    std::optional<std::size_t> slot_at(Date d) const;

    bool operator==(const TimeGrid&) const = default;

private:
    Date start_;
    std::size_t length_;
};

enum class Quality { Good, Bad };

struct Sample {
    Date date;
    double value = 0.0;
    Quality quality = Quality::Good;
};

class ObservationSeries {
public:
    ObservationSeries(std::string pixel_id, std::string region_id, std::vector<Sample> samples);

    const std::string& pixel_id() const noexcept { return pixel_id_; }
    const std::string& region_id() const noexcept { return region_id_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }

    std::size_t good_count() const;

private:
    std::string pixel_id_;
    std::string region_id_;
    std::vector<Sample> samples_;
};

class WeeklySeries {
public:
    WeeklySeries(TimeGrid grid, std::vector<std::optional<double>> values);

    /// All-gap series on `grid`.
    static WeeklySeries empty(TimeGrid grid);

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<std::optional<double>>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }

    const std::optional<double>& operator[](std::size_t i) const { return values_[i]; }
    bool present(std::size_t i) const { return values_[i].has_value(); }
    std::size_t present_count() const;

    /// Same grid, with slot `i` replaced.
    WeeklySeries with(std::size_t i, std::optional<double> v) const;

    bool operator==(const WeeklySeries&) const = default;

private:
    TimeGrid grid_;
    std::vector<std::optional<double>> values_;
};

enum class IndexKind { Ndvi, NdviAnomaly, Vci, Vci3m };

const char* to_string(IndexKind kind);
IndexKind parse_index_kind(std::string_view text);

class IndexSeries {
public:
    /// Validates the range invariant of the kind (VCI in [0,100], NDVI in [-1,1]).
    IndexSeries(WeeklySeries series, IndexKind kind, std::string region_id);

    const WeeklySeries& series() const noexcept { return series_; }
    IndexKind kind() const noexcept { return kind_; }
    const std::string& region_id() const noexcept { return region_id_; }

private:
    WeeklySeries series_;
    IndexKind kind_;
    std::string region_id_;
};

enum class DroughtCategory { Wet, Normal, Moderate, Severe, Extreme };

inline constexpr double kWetBoundary = 50.0;
inline constexpr double kNormalBoundary = 35.0;
inline constexpr double kModerateBoundary = 20.0;
inline constexpr double kSevereBoundary = 10.0;

/// NDMA drought alert threshold on VCI3M (alert when strictly below).
inline constexpr double kDroughtAlertThreshold = 35.0;

/// Boundary values go to the drier class: 35 -> Moderate, 50 -> Normal.
DroughtCategory categorize(double vci3m);
const char* to_string(DroughtCategory c);

struct SlotValue {
    std::size_t slot;
    double value;
};

/// Maps good samples onto grid slots; bad samples are dropped.
/// Throws Error(OutOfRange) listing every sample that falls outside the grid.
std::vector<SlotValue> align_to_grid(const ObservationSeries& obs, const TimeGrid& grid);

}  // namespace vegcast
