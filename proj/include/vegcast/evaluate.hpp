#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vegcast/ar.hpp"
#include "vegcast/types.hpp"

namespace vegcast::eval {

enum class Method { Gp, Ar, Persistence };
const char* to_string(Method m);
Method parse_method(std::string_view text);

struct ForecastRecord {
    std::string region_id;
    Date issue_date;
    std::size_t lead = 1;
    double predicted = 0.0;
    double truth = 0.0;
    Method method = Method::Ar;
    IndexKind kind = IndexKind::Vci3m;
    /// Truth at the issue date; needed for transition skill.
    std::optional<double> truth_at_issue;
    /// Fraction of pixels with a good observation in the issue week.
    std::optional<double> clear_fraction;
};

/// 1 - SSE/SST. Absent when truth variance is zero. Throws with fewer than 2 records.
std::optional<double> r2_score(std::span<const ForecastRecord> records);

/// 100 * sqrt(SSE/SST).
std::optional<double> s_metric(std::span<const ForecastRecord> records);

double rmse(std::span<const ForecastRecord> records);

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

struct BiasFit {
    Estimate slope;
    Estimate intercept;
};

/// OLS of truth on forecast. Absent when forecast variance is zero.
std::optional<BiasFit> bias_regression(std::span<const ForecastRecord> records);

struct RocPoint {
    double threshold = 0.0;
    double hit_rate = 0.0;
    double false_alarm_rate = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// 201 evenly spaced values over [0, 100] plus `alert_threshold`, ascending.
std::vector<double> default_binarization_grid(double alert_threshold = kDroughtAlertThreshold);

/// Alert when predicted < b, for each b in `grid`. Throws Error(Degenerate)
/// when the truths contain only one class.
std::vector<RocPoint> roc_curve(std::span<const ForecastRecord> records, double drought_threshold,
                                std::span<const double> grid);

/// Trapezoidal area under the curve, closed with (0,0) and (1,1).
double roc_auc(std::span<const RocPoint> points);

struct TransitionPoint {
    double threshold = 0.0;
    std::optional<double> hit_rate;
    std::optional<double> false_alarm_ratio;
    std::size_t hits = 0, misses = 0, false_alarms = 0, correct_negatives = 0;
};

struct TransitionSkill {
    std::vector<TransitionPoint> points;
    std::size_t normal_at_issue = 0;  // records conditioned on
    std::size_t transitions = 0;      // actual transitions among them
    std::size_t skipped = 0;          // records without truth at issue
};

/// Restricted to records with truth_at_issue >= threshold. Hit rate is
/// P(predicted transition | transition); false alarm ratio is
/// P(no transition | predicted transition).
TransitionSkill transition_skill(std::span<const ForecastRecord> records, double drought_threshold,
                                 std::span<const double> grid);

enum class Breakdown { Category, WeekOfYear, Region };
const char* to_string(Breakdown b);

struct BucketRow {
    std::string bucket;
    std::size_t count = 0;
    double rmse = 0.0;
};

/// RMSE per bucket in a fixed order (categories wet..extreme, weeks 1..52,
/// regions sorted). Empty buckets are omitted.
std::vector<BucketRow> breakdown_rmse(std::span<const ForecastRecord> records, Breakdown by);

struct PersistenceComparison {
    std::optional<double> ratio_pct;
    std::size_t matched = 0;
    std::size_t unmatched_method = 0;
    std::size_t unmatched_persistence = 0;
};

/// 100 * RMSE(method) / RMSE(persistence) over records matched on
/// (region, issue date, lead).
PersistenceComparison persistence_ratio(std::span<const ForecastRecord> method,
                                        std::span<const ForecastRecord> persistence);

struct CoverageRow {
    std::string region_id;
    std::size_t assessed = 0;
    std::size_t forecastable = 0;
    double pct = 0.0;
};

/// Fraction of assessment weeks (burn_in .. last - lead) where the AR window
/// rules hold and the target week is present.
std::vector<CoverageRow> coverage_report(std::span<const IndexSeries> series, const ar::ARConfig& cfg,
                                         std::size_t burn_in);

struct ClearPixelRow {
    int pct = 0;
    std::size_t count = 0;
    double rmse = 0.0;
};

struct ClearPixelReport {
    std::vector<ClearPixelRow> buckets;
    /// Pearson correlation of bucket percentage vs bucket RMSE; absent with
    /// fewer than 3 buckets. Zero when RMSE does not vary.
    std::optional<double> pearson_r;
};

/// Records without clear_fraction are ignored. Buckets are floor(100 * fraction).
ClearPixelReport clear_pixel_correlation(std::span<const ForecastRecord> records);

}  // namespace vegcast::eval
