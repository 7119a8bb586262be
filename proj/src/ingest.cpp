#include "vegcast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace vegcast {

WeeklySeries composite_weekly(const ObservationSeries& obs, const TimeGrid& grid) {
    std::vector<double> sum(grid.length(), 0.0);
    std::vector<std::size_t> count(grid.length(), 0);
    for (const auto& [slot, value] : align_to_grid(obs, grid)) {
        sum[slot] += value;
        ++count[slot];
    }
    std::vector<std::optional<double>> values(grid.length());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (count[i] > 0) values[i] = sum[i] / static_cast<double>(count[i]);
    }
    return WeeklySeries(grid, std::move(values));
}

WeeklySeries aggregate_mean(std::span<const WeeklySeries> series, std::size_t min_count) {
    if (series.empty()) {
        throw Error(ErrorCode::InvalidInput, "cannot aggregate an empty pixel set");
    }
    if (min_count == 0) {
        throw Error(ErrorCode::InvalidInput, "minimum pixel count must be at least 1");
    }
    const TimeGrid& grid = series.front().grid();
    for (const auto& s : series) {
        if (!(s.grid() == grid)) {
            throw Error(ErrorCode::InvalidInput, "pixel series do not share one time grid");
        }
    }
    std::vector<std::optional<double>> values(grid.length());
    for (std::size_t i = 0; i < grid.length(); ++i) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : series) {
            if (s[i]) {
                sum += *s[i];
                ++n;
            }
        }
        if (n >= min_count) values[i] = sum / static_cast<double>(n);
    }
    return WeeklySeries(grid, std::move(values));
}

WeeklySeries aggregate_region(const RegionSampleSet& set) {
    if (set.pixel_series.empty()) {
        throw Error(ErrorCode::InvalidInput, "region " + set.region_id + " has no pixel series");
    }
    return aggregate_mean(set.pixel_series, set.min_pixels_for_aggregate);
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return fields;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::Parse, "malformed number '" + std::string(text) + "'");
    }
    return v;
}

namespace {

std::size_t column_index(const std::vector<std::string_view>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw Error(ErrorCode::Parse, "line 1: missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

std::string at_line(std::size_t line) {
    return "line " + std::to_string(line) + ": ";
}

}  // namespace

std::vector<ObservationSeries> parse_observations(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::Parse, "empty observation file");
    }
    const auto header = split_csv_line(line);
    const std::size_t c_pixel = column_index(header, schema.pixel_column);
    const std::size_t c_region = column_index(header, schema.region_column);
    const std::size_t c_date = column_index(header, schema.date_column);
    const std::size_t c_value = column_index(header, schema.value_column);
    const std::size_t c_quality = column_index(header, schema.quality_column);
    const std::size_t n_cols = header.size();

    struct Pending {
        std::string region;
        std::vector<Sample> samples;
        std::vector<std::size_t> lines;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, Pending> pixels;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != n_cols) {
            throw Error(ErrorCode::Parse, at_line(line_no) + "expected " + std::to_string(n_cols) +
                                              " fields, found " + std::to_string(f.size()));
        }
        Sample s;
        try {
            s.date = parse_date(f[c_date]);
        } catch (const Error& e) {
            throw Error(ErrorCode::Parse, at_line(line_no) + e.what());
        }
        const auto q = f[c_quality];
        if (q == schema.good_token) {
            s.quality = Quality::Good;
        } else if (q == schema.bad_token) {
            s.quality = Quality::Bad;
        } else {
            throw Error(ErrorCode::Parse, at_line(line_no) + "unknown quality token '" + std::string(q) + "'");
        }
        if (f[c_value].empty() && s.quality == Quality::Bad) {
            s.value = 0.0;
        } else {
            try {
                s.value = parse_double(f[c_value]) / schema.value_scale;
            } catch (const Error& e) {
                throw Error(ErrorCode::Parse, at_line(line_no) + e.what());
            }
            if (s.quality == Quality::Good && !(s.value >= -1.0 && s.value <= 1.0)) {
                throw Error(ErrorCode::Parse, at_line(line_no) + "NDVI outside [-1, 1]");
            }
        }
        const std::string pixel(f[c_pixel]);
        auto [it, inserted] = pixels.try_emplace(pixel);
        if (inserted) {
            order.push_back(pixel);
            it->second.region = std::string(f[c_region]);
        } else if (it->second.region != f[c_region]) {
            throw Error(ErrorCode::Parse, at_line(line_no) + "pixel " + pixel + " changes region");
        }
        it->second.samples.push_back(s);
        it->second.lines.push_back(line_no);
    }

    std::vector<ObservationSeries> out;
    out.reserve(order.size());
    for (const auto& pixel : order) {
        auto& p = pixels.at(pixel);
        std::vector<std::size_t> idx(p.samples.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return p.samples[a].date < p.samples[b].date; });
        std::vector<Sample> sorted;
        sorted.reserve(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& s = p.samples[idx[k]];
            if (!sorted.empty() && sorted.back().date == s.date) {
                throw Error(ErrorCode::Duplicate, "line " + std::to_string(p.lines[idx[k]]) +
                                                      ": duplicate record for pixel " + pixel + " on " +
                                                      format_date(s.date) + " (first at line " +
                                                      std::to_string(p.lines[idx[k - 1]]) + ")");
            }
            sorted.push_back(s);
        }
        out.emplace_back(pixel, p.region, std::move(sorted));
    }
    return out;
}

std::vector<ObservationSeries> load_observations(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
    }
    return parse_observations(in, schema);
}

TimeGrid grid_for(std::span<const ObservationSeries> series, std::chrono::weekday anchor) {
    std::optional<Date> first, last;
    for (const auto& s : series) {
        if (s.samples().empty()) continue;
        const Date a = s.samples().front().date;
        const Date b = s.samples().back().date;
        if (!first || a < *first) first = a;
        if (!last || b > *last) last = b;
    }
    if (!first) {
        throw Error(ErrorCode::InsufficientData, "no samples to build a grid from");
    }
    return TimeGrid::covering(*first, *last, anchor);
}

void write_regional_csv(std::ostream& out, const RegionalSeries& series) {
    out << "region_id,date,value\n";
    for (const auto& [region, s] : series) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << region << ',' << format_date(s.grid().date(i)) << ',';
            if (s[i]) out << format_double(*s[i]);
            out << '\n';
        }
    }
}

RegionalSeries read_regional_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string_view>{"region_id", "date", "value"}) {
        throw Error(ErrorCode::Parse, "line 1: expected header region_id,date,value");
    }
    struct Rows {
        std::vector<Date> dates;
        std::vector<std::optional<double>> values;
    };
    std::map<std::string, Rows> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3) {
            throw Error(ErrorCode::Parse, at_line(line_no) + "expected 3 fields");
        }
        auto& r = rows[std::string(f[0])];
        try {
            const Date d = parse_date(f[1]);
            if (!r.dates.empty() && (d - r.dates.back()).count() != TimeGrid::kStepDays) {
                throw Error(ErrorCode::Parse, "dates are not on a weekly grid");
            }
            r.dates.push_back(d);
            r.values.push_back(f[2].empty() ? std::nullopt : std::optional<double>(parse_double(f[2])));
        } catch (const Error& e) {
            throw Error(ErrorCode::Parse, at_line(line_no) + e.what());
        }
    }
    RegionalSeries out;
    for (auto& [region, r] : rows) {
        TimeGrid grid(r.dates.front(), r.dates.size());
        out.emplace(region, WeeklySeries(grid, std::move(r.values)));
    }
    return out;
}

void save_regional_csv(const std::filesystem::path& path, const RegionalSeries& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
    }
    write_regional_csv(out, series);
}

RegionalSeries load_regional_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
    }
    return read_regional_csv(in);
}

}  // namespace vegcast
