#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vegcast/types.hpp"

namespace vegcast::ar {

struct ARConfig {
    std::size_t order = 3;          // p
    std::size_t train_length = 200; // T
    std::size_t lead = 1;           // n
    bool demean = true;
    /// Require the whole training window to be gap-free.
    bool strict_window = false;
    /// Non-strict windows need at least this fraction of T - p - n usable rows.
    double min_valid_fraction = 0.8;

    /// Throws Error(Config) unless p >= 1, n >= 1 and T >= p + n + 10.
    void validate() const;
};

struct ARModel {
    /// a_0..a_{p-1}; a_i multiplies X_{t-i}.
    std::vector<double> coefficients;
    double training_mean = 0.0;
    double residual_std = 0.0;
    std::size_t lead = 1;
    std::size_t rows = 0;
    bool degenerate = false;
    bool ridge = false;

    /// Forecast from the p most recent values, newest first.
    double predict(std::span<const double> recent_newest_first) const;
};

/// Direct n-step regression of X_{t+n} on (X_t, ..., X_{t-p+1}) over every row
/// of the window whose lags and target are present. Demeaning uses the mean of
/// the window's present values.
ARModel ar_fit(std::span<const std::optional<double>> window, const ARConfig& cfg);
ARModel ar_fit(std::span<const double> window, const ARConfig& cfg);

enum class Reason { Ok, Gap, InsufficientHistory, NotOnGrid, Degenerate };
const char* to_string(Reason r);

struct Forecast {
    std::optional<double> value;
    Reason reason = Reason::Ok;
};

/// Checks the gap rules for a forecast issued at `issue_slot`: the window of
/// T slots ending there exists, its p most recent values are present, and it
/// is gap-free (strict) or has enough usable rows.
Reason check_window(const WeeklySeries& series, std::size_t issue_slot, const ARConfig& cfg);

/// Fits on the T slots ending at `issue_date` and predicts issue_date + n.
Forecast ar_forecast(const IndexSeries& series, Date issue_date, const ARConfig& cfg);

/// The value at the issue date, unchanged.
Forecast persistence_forecast(const IndexSeries& series, Date issue_date, std::size_t lead);

struct GrangerFit {
    double extended_rmse = 0.0;
    double reduced_rmse = 0.0;
    double pct_reduction = 0.0;
    bool degenerate = false;
};

/// In-window comparison of X_{t+n} ~ X lags (reduced) against
/// X_{t+n} ~ X lags + Y lags (extended). Windows must be gap-free and equal length.
GrangerFit granger_fit(std::span<const double> target, std::span<const double> source, std::size_t p,
                       std::size_t q, std::size_t n, bool demean = true);

struct GrangerConfig {
    ARConfig ar;              // p, T, n, demean
    std::size_t source_lags = 3;  // q
    double threshold_pct = 5.0;
    std::size_t window_stride = 1;
};

struct GrangerEntry {
    std::string from;
    std::string to;
    double mean_pct_reduction = 0.0;
    std::size_t windows = 0;
};

struct GrangerMatrix {
    /// Pairs whose mean reduction reaches the threshold.
    std::vector<GrangerEntry> entries;
    /// Every evaluated pair, including those below threshold.
    std::vector<GrangerEntry> all_pairs;
    /// Pairs with no admissible window, with a reason.
    std::vector<std::pair<GrangerEntry, std::string>> absent;
};

/// Mean in-window RMSE reduction for every ordered pair of distinct regions,
/// over all length-T windows where both series are gap-free.
GrangerMatrix granger_matrix(std::span<const IndexSeries> regions, const GrangerConfig& cfg);

}  // namespace vegcast::ar
