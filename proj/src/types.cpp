#include "vegcast/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vegcast {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::Parse, "malformed date '" + std::string(whole) + "'");
    }
    return v;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw Error(ErrorCode::Parse, "malformed date '" + std::string(text) + "'");
    }
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw Error(ErrorCode::Parse, "invalid calendar date '" + std::string(text) + "'");
    }
    return Date{ymd};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

int iso_week(Date d) {
    using namespace std::chrono;
    const unsigned iso_wd = weekday{d}.iso_encoding();  // Mon=1..Sun=7
    const Date thursday = d - days{iso_wd - 1} + days{3};
    const year y = year_month_day{thursday}.year();
    const Date jan1 = sys_days{y / January / 1};
    return static_cast<int>((thursday - jan1).count() / 7) + 1;
}

int week_of_year(Date d) {
    return std::min(iso_week(d), 52);
}

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidValue: return "INVALID_VALUE";
        case ErrorCode::InvalidInput: return "INVALID_INPUT";
        case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
        case ErrorCode::Parse: return "PARSE";
        case ErrorCode::Duplicate: return "DUPLICATE";
        case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
        case ErrorCode::Degenerate: return "DEGENERATE";
        case ErrorCode::FitFailure: return "FIT_FAILURE";
        case ErrorCode::Conditioning: return "CONDITIONING";
        case ErrorCode::Config: return "CONFIG";
    }
    return "UNKNOWN";
}

// --- TimeGrid ---------------------------------------------------------------

TimeGrid::TimeGrid(Date start, std::size_t length) : start_(start), length_(length) {
    if (length == 0) {
        throw Error(ErrorCode::InvalidInput, "time grid must have at least one slot");
    }
}

TimeGrid TimeGrid::covering(Date first, Date last, std::chrono::weekday anchor) {
    using std::chrono::days;
    if (last < first) {
        throw Error(ErrorCode::InvalidInput, "grid span ends before it starts");
    }
    Date start = first;
    while (std::chrono::weekday{start} != anchor) {
        start += days{1};
    }
    const auto span = (last - start).count();
    const std::size_t length =
        span <= 0 ? 1 : static_cast<std::size_t>((span + kStepDays - 1) / kStepDays) + 1;
    return TimeGrid(start, length);
}

Date TimeGrid::date(std::size_t slot) const {
    return start_ + std::chrono::days{static_cast<long>(slot) * kStepDays};
}

std::optional<std::size_t> TimeGrid::slot_containing(Date d) const {
    const long offset = (d - start_).count();
    // ceil(offset / 7) for possibly negative offsets
    const long slot = offset >= 0 ? (offset + kStepDays - 1) / kStepDays : -((-offset) / kStepDays);
    if (slot < 0 || slot >= static_cast<long>(length_)) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(slot);
}

std::optional<std::size_t> TimeGrid::slot_at(Date d) const {
    const long offset = (d - start_).count();
    if (offset < 0 || offset % kStepDays != 0) {
        return std::nullopt;
    }
    const auto slot = static_cast<std::size_t>(offset / kStepDays);
    if (slot >= length_) {
        return std::nullopt;
    }
    return slot;
}

// --- ObservationSeries ------------------------------------------------------

ObservationSeries::ObservationSeries(std::string pixel_id, std::string region_id,
                                     std::vector<Sample> samples)
    : pixel_id_(std::move(pixel_id)), region_id_(std::move(region_id)), samples_(std::move(samples)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (i > 0 && !(samples_[i - 1].date < s.date)) {
            throw Error(ErrorCode::InvalidInput,
                        "pixel " + pixel_id_ + ": samples not strictly increasing at " +
                            format_date(s.date));
        }
        if (s.quality == Quality::Good && !(s.value >= -1.0 && s.value <= 1.0)) {
            throw Error(ErrorCode::InvalidValue,
                        "pixel " + pixel_id_ + ": NDVI outside [-1, 1] at " + format_date(s.date));
        }
    }
}

std::size_t ObservationSeries::good_count() const {
    return static_cast<std::size_t>(std::count_if(samples_.begin(), samples_.end(), [](const Sample& s) {
        return s.quality == Quality::Good;
    }));
}

// --- WeeklySeries -----------------------------------------------------------

WeeklySeries::WeeklySeries(TimeGrid grid, std::vector<std::optional<double>> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.length()) {
        throw Error(ErrorCode::InvalidInput, "series length does not match its grid");
    }
}

WeeklySeries WeeklySeries::empty(TimeGrid grid) {
    return WeeklySeries(grid, std::vector<std::optional<double>>(grid.length()));
}

std::size_t WeeklySeries::present_count() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); }));
}

WeeklySeries WeeklySeries::with(std::size_t i, std::optional<double> v) const {
    auto values = values_;
    values.at(i) = v;
    return WeeklySeries(grid_, std::move(values));
}

// --- IndexSeries ------------------------------------------------------------

const char* to_string(IndexKind kind) {
    switch (kind) {
        case IndexKind::Ndvi: return "NDVI";
        case IndexKind::NdviAnomaly: return "NDVI_ANOMALY";
        case IndexKind::Vci: return "VCI";
        case IndexKind::Vci3m: return "VCI3M";
    }
    return "UNKNOWN";
}

IndexKind parse_index_kind(std::string_view text) {
    if (text == "NDVI") return IndexKind::Ndvi;
    if (text == "NDVI_ANOMALY") return IndexKind::NdviAnomaly;
    if (text == "VCI") return IndexKind::Vci;
    if (text == "VCI3M") return IndexKind::Vci3m;
    throw Error(ErrorCode::Parse, "unknown index kind '" + std::string(text) + "'");
}

IndexSeries::IndexSeries(WeeklySeries series, IndexKind kind, std::string region_id)
    : series_(std::move(series)), kind_(kind), region_id_(std::move(region_id)) {
    constexpr double tol = 1e-9;
    for (std::size_t i = 0; i < series_.size(); ++i) {
        if (!series_[i]) continue;
        const double v = *series_[i];
        bool ok = std::isfinite(v);
        if (kind_ == IndexKind::Vci || kind_ == IndexKind::Vci3m) {
            ok = ok && v >= -tol && v <= 100.0 + tol;
        } else if (kind_ == IndexKind::Ndvi) {
            ok = ok && v >= -1.0 && v <= 1.0;
        }
        if (!ok) {
            throw Error(ErrorCode::InvalidValue, std::string(to_string(kind_)) + " value " +
                                                     std::to_string(v) + " out of range at " +
                                                     format_date(series_.grid().date(i)));
        }
    }
}

// --- DroughtCategory --------------------------------------------------------

DroughtCategory categorize(double vci3m) {
    if (!std::isfinite(vci3m)) {
        throw Error(ErrorCode::InvalidValue, "cannot categorize a non-finite VCI3M");
    }
    if (vci3m > kWetBoundary) return DroughtCategory::Wet;
    if (vci3m > kNormalBoundary) return DroughtCategory::Normal;
    if (vci3m > kModerateBoundary) return DroughtCategory::Moderate;
    if (vci3m > kSevereBoundary) return DroughtCategory::Severe;
    return DroughtCategory::Extreme;
}

const char* to_string(DroughtCategory c) {
    switch (c) {
        case DroughtCategory::Wet: return "WET";
        case DroughtCategory::Normal: return "NORMAL";
        case DroughtCategory::Moderate: return "MODERATE";
        case DroughtCategory::Severe: return "SEVERE";
        case DroughtCategory::Extreme: return "EXTREME";
    }
    return "UNKNOWN";
}

// --- align_to_grid ----------------------------------------------------------

std::vector<SlotValue> align_to_grid(const ObservationSeries& obs, const TimeGrid& grid) {
    std::vector<SlotValue> out;
    std::vector<std::string> outside;
    for (const auto& s : obs.samples()) {
        const auto slot = grid.slot_containing(s.date);
        if (!slot) {
            outside.push_back(format_date(s.date));
            continue;
        }
        if (s.quality == Quality::Good) {
            out.push_back({*slot, s.value});
        }
    }
    if (!outside.empty()) {
        std::ostringstream msg;
        msg << "pixel " << obs.pixel_id() << ": samples outside grid span:";
        for (const auto& d : outside) msg << ' ' << d;
        throw Error(ErrorCode::OutOfRange, msg.str());
    }
    return out;
}

}  // namespace vegcast
