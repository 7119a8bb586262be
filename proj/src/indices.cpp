#include "vegcast/indices.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "vegcast/ingest.hpp"

namespace vegcast {

Climatology build_climatology(const WeeklySeries& series) {
    Climatology clim;
    std::array<double, kWeeksPerYear> sum{};
    for (auto& w : clim.weeks) {
        w.min = std::numeric_limits<double>::infinity();
        w.max = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!series[i]) continue;
        const auto w = static_cast<std::size_t>(week_of_year(series.grid().date(i)) - 1);
        const double v = *series[i];
        auto& st = clim.weeks[w];
        st.min = std::min(st.min, v);
        st.max = std::max(st.max, v);
        sum[w] += v;
        ++st.count;
    }
    for (std::size_t w = 0; w < clim.weeks.size(); ++w) {
        auto& st = clim.weeks[w];
        if (st.count < 2) {
            throw Error(ErrorCode::InsufficientData, "climatology week " + std::to_string(w + 1) + " has " +
                                                         std::to_string(st.count) + " values; need 2");
        }
        st.mean = std::clamp(sum[w] / static_cast<double>(st.count), st.min, st.max);
    }
    return clim;
}

void write_climatology_csv(std::ostream& out, const Climatology& clim) {
    out << "week,min,max,mean\n";
    for (int w = 1; w <= kWeeksPerYear; ++w) {
        const auto& st = clim.week(w);
        out << w << ',' << format_double(st.min) << ',' << format_double(st.max) << ',' << format_double(st.mean)
            << '\n';
    }
}

Climatology read_climatology_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string_view>{"week", "min", "max", "mean"}) {
        throw Error(ErrorCode::Parse, "line 1: expected header week,min,max,mean");
    }
    Climatology clim;
    std::array<bool, kWeeksPerYear> seen{};
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected 4 fields");
        const int w = static_cast<int>(parse_double(f[0]));
        if (w < 1 || w > kWeeksPerYear) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": week out of range");
        }
        auto& st = clim.weeks[static_cast<std::size_t>(w - 1)];
        st.min = parse_double(f[1]);
        st.max = parse_double(f[2]);
        st.mean = parse_double(f[3]);
        seen[static_cast<std::size_t>(w - 1)] = true;
    }
    for (std::size_t w = 0; w < seen.size(); ++w) {
        if (!seen[w]) throw Error(ErrorCode::Parse, "climatology missing week " + std::to_string(w + 1));
    }
    return clim;
}

VciResult compute_vci(const WeeklySeries& ndvi, const Climatology& clim, const std::string& region_id,
                      DegenerateWeekPolicy policy) {
    std::vector<std::optional<double>> out(ndvi.size());
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < ndvi.size(); ++i) {
        if (!ndvi[i]) continue;
        const int w = week_of_year(ndvi.grid().date(i));
        const auto& st = clim.week(w);
        const double range = st.max - st.min;
        if (!(range > 1e-12 * std::max(1.0, std::abs(st.max)))) {
            if (policy == DegenerateWeekPolicy::Midpoint) {
                out[i] = 50.0;
                continue;
            }
            throw Error(ErrorCode::Degenerate, "DEGENERATE_WEEK: climatology week " + std::to_string(w) +
                                                   " has max == min");
        }
        double v = 100.0 * ((*ndvi[i] - st.min) / range);
        if (v < 0.0 || v > 100.0) {
            v = std::clamp(v, 0.0, 100.0);
            ++clipped;
        }
        out[i] = v;
    }
    return {IndexSeries(WeeklySeries(ndvi.grid(), std::move(out)), IndexKind::Vci, region_id), clipped};
}

IndexSeries compute_vci3m(const IndexSeries& vci, const WeeklySeries& ndvi) {
    const auto& v = vci.series();
    if (!(v.grid() == ndvi.grid())) {
        throw Error(ErrorCode::InvalidInput, "VCI and NDVI series must share one grid");
    }
    if (v.size() < kVci3mWindow) {
        throw Error(ErrorCode::InsufficientData, "VCI3M needs a grid of at least 12 weeks");
    }
    std::vector<std::optional<double>> out(v.size());
    for (std::size_t i = kVci3mWindow - 1; i < v.size(); ++i) {
        if (!ndvi[i]) continue;
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t k = i + 1 - kVci3mWindow; k <= i; ++k) {
            if (v[k]) {
                sum += *v[k];
                ++n;
            }
        }
        if (n > 0) out[i] = std::clamp(sum / static_cast<double>(n), 0.0, 100.0);
    }
    return IndexSeries(WeeklySeries(v.grid(), std::move(out)), IndexKind::Vci3m, vci.region_id());
}

IndexSeries compute_ndvi_anomaly(const WeeklySeries& ndvi, const Climatology& clim, const std::string& region_id) {
    std::vector<std::optional<double>> out(ndvi.size());
    for (std::size_t i = 0; i < ndvi.size(); ++i) {
        if (ndvi[i]) out[i] = *ndvi[i] - clim.week(week_of_year(ndvi.grid().date(i))).mean;
    }
    return IndexSeries(WeeklySeries(ndvi.grid(), std::move(out)), IndexKind::NdviAnomaly, region_id);
}

}  // namespace vegcast
