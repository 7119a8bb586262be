#include "vegcast/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace vegcast::eval {

const char* to_string(Method m) {
    switch (m) {
        case Method::Gp: return "GP";
        case Method::Ar: return "AR";
        case Method::Persistence: return "PERSISTENCE";
    }
    return "UNKNOWN";
}

Method parse_method(std::string_view text) {
    if (text == "GP") return Method::Gp;
    if (text == "AR") return Method::Ar;
    if (text == "PERSISTENCE") return Method::Persistence;
    throw Error(ErrorCode::Parse, "unknown method '" + std::string(text) + "'");
}

namespace {

struct Sums {
    double sse = 0.0;
    double sst = 0.0;
};

Sums squared_sums(std::span<const ForecastRecord> records) {
    if (records.size() < 2) {
        throw Error(ErrorCode::InsufficientData, "metric needs at least 2 records");
    }
    double mean = 0.0;
    for (const auto& r : records) mean += r.truth;
    mean /= static_cast<double>(records.size());
    Sums s;
    for (const auto& r : records) {
        s.sse += (r.truth - r.predicted) * (r.truth - r.predicted);
        s.sst += (r.truth - mean) * (r.truth - mean);
    }
    return s;
}

}  // namespace

std::optional<double> r2_score(std::span<const ForecastRecord> records) {
    const Sums s = squared_sums(records);
    if (!(s.sst > 0.0)) return std::nullopt;
    return 1.0 - s.sse / s.sst;
}

std::optional<double> s_metric(std::span<const ForecastRecord> records) {
    const Sums s = squared_sums(records);
    if (!(s.sst > 0.0)) return std::nullopt;
    return 100.0 * std::sqrt(s.sse / s.sst);
}

double rmse(std::span<const ForecastRecord> records) {
    if (records.empty()) throw Error(ErrorCode::InsufficientData, "RMSE of an empty record set");
    double sse = 0.0;
    for (const auto& r : records) sse += (r.truth - r.predicted) * (r.truth - r.predicted);
    return std::sqrt(sse / static_cast<double>(records.size()));
}

std::optional<BiasFit> bias_regression(std::span<const ForecastRecord> records) {
    const std::size_t n = records.size();
    if (n < 3) throw Error(ErrorCode::InsufficientData, "bias regression needs at least 3 records");
    double mf = 0.0, my = 0.0;
    for (const auto& r : records) {
        mf += r.predicted;
        my += r.truth;
    }
    mf /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sff = 0.0, sfy = 0.0;
    for (const auto& r : records) {
        sff += (r.predicted - mf) * (r.predicted - mf);
        sfy += (r.predicted - mf) * (r.truth - my);
    }
    if (!(sff > 0.0)) return std::nullopt;
    BiasFit fit;
    fit.slope.value = sfy / sff;
    fit.intercept.value = my - fit.slope.value * mf;
    double sse = 0.0;
    for (const auto& r : records) {
        const double e = r.truth - fit.intercept.value - fit.slope.value * r.predicted;
        sse += e * e;
    }
    const double sigma2 = sse / static_cast<double>(n - 2);
    fit.slope.stderr_ = std::sqrt(sigma2 / sff);
    fit.intercept.stderr_ = std::sqrt(sigma2 * (1.0 / static_cast<double>(n) + mf * mf / sff));
    return fit;
}

std::vector<double> default_binarization_grid(double alert_threshold) {
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(0.5 * i);
    grid.push_back(alert_threshold);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

std::vector<RocPoint> roc_curve(std::span<const ForecastRecord> records, double drought_threshold,
                                std::span<const double> grid) {
    std::size_t positives = 0;
    for (const auto& r : records) positives += r.truth < drought_threshold ? 1 : 0;
    const std::size_t negatives = records.size() - positives;
    if (positives == 0) {
        throw Error(ErrorCode::Degenerate, "ROC undefined: no records with truth below the drought threshold");
    }
    if (negatives == 0) {
        throw Error(ErrorCode::Degenerate, "ROC undefined: no records with truth at or above the drought threshold");
    }
    std::vector<RocPoint> out;
    out.reserve(grid.size());
    for (double b : grid) {
        RocPoint p;
        p.threshold = b;
        for (const auto& r : records) {
            const bool actual = r.truth < drought_threshold;
            const bool alert = r.predicted < b;
            if (actual && alert) ++p.tp;
            else if (actual) ++p.fn;
            else if (alert) ++p.fp;
            else ++p.tn;
        }
        p.hit_rate = static_cast<double>(p.tp) / static_cast<double>(positives);
        p.false_alarm_rate = static_cast<double>(p.fp) / static_cast<double>(negatives);
        out.push_back(p);
    }
    return out;
}

double roc_auc(std::span<const RocPoint> points) {
    std::vector<std::pair<double, double>> xy{{0.0, 0.0}, {1.0, 1.0}};
    for (const auto& p : points) xy.emplace_back(p.false_alarm_rate, p.hit_rate);
    std::sort(xy.begin(), xy.end());
    double area = 0.0;
    for (std::size_t i = 1; i < xy.size(); ++i) {
        area += (xy[i].first - xy[i - 1].first) * 0.5 * (xy[i].second + xy[i - 1].second);
    }
    return area;
}

TransitionSkill transition_skill(std::span<const ForecastRecord> records, double drought_threshold,
                                 std::span<const double> grid) {
    TransitionSkill out;
    std::vector<const ForecastRecord*> normal;
    for (const auto& r : records) {
        if (!r.truth_at_issue) {
            ++out.skipped;
            continue;
        }
        if (*r.truth_at_issue >= drought_threshold) {
            normal.push_back(&r);
            out.transitions += r.truth < drought_threshold ? 1 : 0;
        }
    }
    out.normal_at_issue = normal.size();
    for (double b : grid) {
        TransitionPoint p;
        p.threshold = b;
        for (const auto* r : normal) {
            const bool actual = r->truth < drought_threshold;
            const bool predicted = r->predicted < b;
            if (actual && predicted) ++p.hits;
            else if (actual) ++p.misses;
            else if (predicted) ++p.false_alarms;
            else ++p.correct_negatives;
        }
        if (p.hits + p.misses > 0) {
            p.hit_rate = static_cast<double>(p.hits) / static_cast<double>(p.hits + p.misses);
        }
        if (p.hits + p.false_alarms > 0) {
            p.false_alarm_ratio = static_cast<double>(p.false_alarms) / static_cast<double>(p.hits + p.false_alarms);
        }
        out.points.push_back(p);
    }
    return out;
}

const char* to_string(Breakdown b) {
    switch (b) {
        case Breakdown::Category: return "category";
        case Breakdown::WeekOfYear: return "week_of_year";
        case Breakdown::Region: return "region";
    }
    return "unknown";
}

std::vector<BucketRow> breakdown_rmse(std::span<const ForecastRecord> records, Breakdown by) {
    // ordered key -> (label, sse, count)
    std::map<std::tuple<int, std::string>, std::pair<double, std::size_t>> buckets;
    for (const auto& r : records) {
        std::tuple<int, std::string> key;
        switch (by) {
            case Breakdown::Category: {
                const auto c = categorize(r.truth);
                key = {static_cast<int>(c), to_string(c)};
                break;
            }
            case Breakdown::WeekOfYear: {
                const int w = week_of_year(r.issue_date + std::chrono::days{7 * static_cast<long>(r.lead)});
                key = {w, std::to_string(w)};
                break;
            }
            case Breakdown::Region: key = {0, r.region_id}; break;
        }
        auto& b = buckets[key];
        b.first += (r.truth - r.predicted) * (r.truth - r.predicted);
        ++b.second;
    }
    std::vector<BucketRow> out;
    for (const auto& [key, b] : buckets) {
        out.push_back({std::get<1>(key), b.second, std::sqrt(b.first / static_cast<double>(b.second))});
    }
    return out;
}

PersistenceComparison persistence_ratio(std::span<const ForecastRecord> method,
                                        std::span<const ForecastRecord> persistence) {
    using Key = std::tuple<std::string, long, std::size_t>;
    auto key_of = [](const ForecastRecord& r) {
        return Key{r.region_id, r.issue_date.time_since_epoch().count(), r.lead};
    };
    std::map<Key, const ForecastRecord*> pers;
    for (const auto& r : persistence) pers.emplace(key_of(r), &r);

    PersistenceComparison out;
    double sse_m = 0.0, sse_p = 0.0;
    std::size_t used_persistence = 0;
    for (const auto& r : method) {
        const auto it = pers.find(key_of(r));
        if (it == pers.end()) {
            ++out.unmatched_method;
            continue;
        }
        ++out.matched;
        ++used_persistence;
        sse_m += (r.truth - r.predicted) * (r.truth - r.predicted);
        const auto& p = *it->second;
        sse_p += (p.truth - p.predicted) * (p.truth - p.predicted);
    }
    out.unmatched_persistence = persistence.size() - used_persistence;
    if (out.matched > 0 && sse_p > 0.0) out.ratio_pct = 100.0 * std::sqrt(sse_m / sse_p);
    return out;
}

std::vector<CoverageRow> coverage_report(std::span<const IndexSeries> series, const ar::ARConfig& cfg,
                                         std::size_t burn_in) {
    std::vector<CoverageRow> out;
    for (const auto& is : series) {
        const auto& s = is.series();
        CoverageRow row;
        row.region_id = is.region_id();
        for (std::size_t t = burn_in; t + cfg.lead < s.size(); ++t) {
            ++row.assessed;
            if (s[t + cfg.lead] && ar::check_window(s, t, cfg) == ar::Reason::Ok) ++row.forecastable;
        }
        row.pct = row.assessed ? 100.0 * static_cast<double>(row.forecastable) / static_cast<double>(row.assessed)
                               : 0.0;
        out.push_back(row);
    }
    std::sort(out.begin(), out.end(), [](const CoverageRow& a, const CoverageRow& b) { return a.region_id < b.region_id; });
    return out;
}

ClearPixelReport clear_pixel_correlation(std::span<const ForecastRecord> records) {
    std::map<int, std::pair<double, std::size_t>> buckets;
    for (const auto& r : records) {
        if (!r.clear_fraction) continue;
        const int pct = std::clamp(static_cast<int>(std::floor(100.0 * *r.clear_fraction)), 0, 100);
        auto& b = buckets[pct];
        b.first += (r.truth - r.predicted) * (r.truth - r.predicted);
        ++b.second;
    }
    ClearPixelReport out;
    for (const auto& [pct, b] : buckets) {
        out.buckets.push_back({pct, b.second, std::sqrt(b.first / static_cast<double>(b.second))});
    }
    if (out.buckets.size() < 3) return out;
    const double n = static_cast<double>(out.buckets.size());
    double mx = 0.0, my = 0.0;
    for (const auto& b : out.buckets) {
        mx += b.pct;
        my += b.rmse;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& b : out.buckets) {
        sxx += (b.pct - mx) * (b.pct - mx);
        syy += (b.rmse - my) * (b.rmse - my);
        sxy += (b.pct - mx) * (b.rmse - my);
    }
    // relative floor: RMSEs equal up to rounding count as constant
    if (syy <= 1e-24 * std::max(1.0, my * my) * n) {
        out.pearson_r = 0.0;
    } else {
        out.pearson_r = sxy / std::sqrt(sxx * syy);
    }
    return out;
}

}  // namespace vegcast::eval
