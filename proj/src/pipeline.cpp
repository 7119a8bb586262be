#include "vegcast/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace vegcast {

namespace fs = std::filesystem;

const char* to_string(PipelineStyle s) {
    return s == PipelineStyle::LandsatGp ? "LANDSAT_GP" : "MODIS_INTERP";
}

PipelineStyle parse_pipeline_style(std::string_view text) {
    if (text == "LANDSAT_GP") return PipelineStyle::LandsatGp;
    if (text == "MODIS_INTERP") return PipelineStyle::ModisInterp;
    throw Error(ErrorCode::Config, "unknown pipeline style '" + std::string(text) + "'");
}

// --- configuration ----------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw Error(ErrorCode::Config, "config key '" + key + "': cannot parse '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw Error(ErrorCode::Config, "config key '" + key + "': expected a boolean, got '" + value + "'");
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += fmt(items[i]);
    }
    return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "input",           "output_dir",        "style",           "climatology",      "degenerate_week",
        "min_pixels",      "value_scale",       "l_max",           "interpolator",     "savgol_window",
        "savgol_order",    "smooth",            "gp_kernel",       "gp_restarts",      "gp_max_iterations",
        "gp_history_weeks", "gp_min_history",   "gp_issue_stride", "index",            "methods",
        "leads",           "ar_order",          "ar_train_length", "ar_demean",        "ar_strict_window",
        "ar_min_valid_fraction", "issue_stride", "burn_in",        "seed",             "threads",
        "cache",
    };
    return keys;
}

void PipelineConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    if (key == "input") {
        inputs.clear();
        for (const auto& p : split_list(value)) inputs.emplace_back(p);
    } else if (key == "output_dir") {
        output_dir = value;
    } else if (key == "style") {
        style = parse_pipeline_style(value);
    } else if (key == "climatology") {
        if (value == "pixel") climatology = ClimatologyMode::Pixel;
        else if (value == "regional") climatology = ClimatologyMode::Regional;
        else throw Error(ErrorCode::Config, "climatology must be 'pixel' or 'regional'");
    } else if (key == "degenerate_week") {
        if (value == "error") degenerate_week = DegenerateWeekPolicy::Error;
        else if (value == "midpoint") degenerate_week = DegenerateWeekPolicy::Midpoint;
        else throw Error(ErrorCode::Config, "degenerate_week must be 'error' or 'midpoint'");
    } else if (key == "min_pixels") {
        min_pixels = parse_number<std::size_t>(key, value);
    } else if (key == "value_scale") {
        schema.value_scale = parse_number<double>(key, value);
    } else if (key == "l_max") {
        gapfill.l_max = parse_number<std::size_t>(key, value);
    } else if (key == "interpolator") {
        try {
            gapfill.interpolator = parse_interpolator(value);
        } catch (const Error& e) {
            throw Error(ErrorCode::Config, e.what());
        }
    } else if (key == "savgol_window") {
        gapfill.savgol_window = parse_number<std::size_t>(key, value);
    } else if (key == "savgol_order") {
        gapfill.savgol_order = parse_number<std::size_t>(key, value);
    } else if (key == "smooth") {
        smooth = parse_bool(key, value);
    } else if (key == "gp_kernel") {
        try {
            gp::Kernel::parse(value);
        } catch (const Error& e) {
            throw Error(ErrorCode::Config, e.what());
        }
        gapfill.gp_kernel = value;
    } else if (key == "gp_restarts") {
        gp.fit.restarts = gapfill.gp_fit.restarts = parse_number<std::size_t>(key, value);
    } else if (key == "gp_max_iterations") {
        gp.fit.max_iterations = gapfill.gp_fit.max_iterations = parse_number<std::size_t>(key, value);
    } else if (key == "gp_history_weeks") {
        gp.history_weeks = parse_number<std::size_t>(key, value);
    } else if (key == "gp_min_history") {
        gp.min_history = parse_number<std::size_t>(key, value);
    } else if (key == "gp_issue_stride") {
        gp_issue_stride = parse_number<std::size_t>(key, value);
    } else if (key == "index") {
        try {
            index = parse_index_kind(value);
        } catch (const Error& e) {
            throw Error(ErrorCode::Config, e.what());
        }
    } else if (key == "methods") {
        methods.clear();
        for (const auto& m : split_list(value)) {
            try {
                methods.push_back(eval::parse_method(m));
            } catch (const Error& e) {
                throw Error(ErrorCode::Config, e.what());
            }
        }
    } else if (key == "leads") {
        leads.clear();
        for (const auto& l : split_list(value)) leads.push_back(parse_number<std::size_t>(key, l));
    } else if (key == "ar_order") {
        ar.order = parse_number<std::size_t>(key, value);
    } else if (key == "ar_train_length") {
        ar.train_length = parse_number<std::size_t>(key, value);
    } else if (key == "ar_demean") {
        ar.demean = parse_bool(key, value);
    } else if (key == "ar_strict_window") {
        ar.strict_window = parse_bool(key, value);
    } else if (key == "ar_min_valid_fraction") {
        ar.min_valid_fraction = parse_number<double>(key, value);
    } else if (key == "issue_stride") {
        issue_stride = parse_number<std::size_t>(key, value);
    } else if (key == "burn_in") {
        if (value == "auto" || value.empty()) burn_in.reset();
        else burn_in = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
        gp.fit.seed = gapfill.gp_fit.seed = seed;
    } else if (key == "threads") {
        threads = parse_number<std::size_t>(key, value);
    } else if (key == "cache") {
        cache = parse_bool(key, value);
    } else {
        throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
    }
}

std::string PipelineConfig::to_text() const {
    std::ostringstream out;
    out << "input=" << join<fs::path>(inputs, [](const fs::path& p) { return p.string(); }) << '\n';
    out << "output_dir=" << output_dir.string() << '\n';
    out << "style=" << to_string(style) << '\n';
    out << "climatology=" << (climatology == ClimatologyMode::Pixel ? "pixel" : "regional") << '\n';
    out << "degenerate_week=" << (degenerate_week == DegenerateWeekPolicy::Error ? "error" : "midpoint") << '\n';
    out << "min_pixels=" << min_pixels << '\n';
    out << "value_scale=" << format_double(schema.value_scale) << '\n';
    out << "l_max=" << gapfill.l_max << '\n';
    out << "interpolator=" << to_string(gapfill.interpolator) << '\n';
    out << "savgol_window=" << gapfill.savgol_window << '\n';
    out << "savgol_order=" << gapfill.savgol_order << '\n';
    out << "smooth=" << bool_text(smooth) << '\n';
    out << "gp_kernel=" << gapfill.gp_kernel << '\n';
    out << "gp_restarts=" << gp.fit.restarts << '\n';
    out << "gp_max_iterations=" << gp.fit.max_iterations << '\n';
    out << "gp_history_weeks=" << gp.history_weeks << '\n';
    out << "gp_min_history=" << gp.min_history << '\n';
    out << "gp_issue_stride=" << gp_issue_stride << '\n';
    out << "index=" << to_string(index) << '\n';
    out << "methods=" << join<eval::Method>(methods, [](const eval::Method& m) { return std::string(eval::to_string(m)); })
        << '\n';
    out << "leads=" << join<std::size_t>(leads, [](const std::size_t& l) { return std::to_string(l); }) << '\n';
    out << "ar_order=" << ar.order << '\n';
    out << "ar_train_length=" << ar.train_length << '\n';
    out << "ar_demean=" << bool_text(ar.demean) << '\n';
    out << "ar_strict_window=" << bool_text(ar.strict_window) << '\n';
    out << "ar_min_valid_fraction=" << format_double(ar.min_valid_fraction) << '\n';
    out << "issue_stride=" << issue_stride << '\n';
    out << "burn_in=" << (burn_in ? std::to_string(*burn_in) : std::string("auto")) << '\n';
    out << "seed=" << seed << '\n';
    out << "threads=" << threads << '\n';
    out << "cache=" << bool_text(cache) << '\n';
    return out.str();
}

void PipelineConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw Error(ErrorCode::Config, what);
    };
    require(!inputs.empty(), "no input given");
    require(!output_dir.empty(), "no output_dir given");
    require(min_pixels >= 1, "min_pixels must be at least 1");
    require(schema.value_scale > 0.0, "value_scale must be positive");
    require(!leads.empty(), "leads must not be empty");
    for (auto l : leads) require(l >= 1, "every lead must be at least 1");
    require(!methods.empty(), "methods must not be empty");
    require(threads >= 1, "threads must be at least 1");
    require(issue_stride >= 1 && gp_issue_stride >= 1, "issue strides must be at least 1");
    gapfill.validate();
    for (auto l : leads) {
        ar::ARConfig a = ar;
        a.lead = l;
        a.validate();
    }
    const bool gp_ok = index == IndexKind::Vci3m || index == IndexKind::NdviAnomaly;
    if (std::find(methods.begin(), methods.end(), eval::Method::Gp) != methods.end()) {
        require(gp_ok, "the GP forecaster needs index VCI3M or NDVI_ANOMALY");
    }
}

std::map<std::string, std::string> read_config_text(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty() || (body.front() == '[' && body.back() == ']')) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::Config, "config line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        out[trim(std::string_view(body).substr(0, eq))] = value;
    }
    return out;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Config: return 1;
        case ErrorCode::Degenerate:
        case ErrorCode::FitFailure:
        case ErrorCode::Conditioning: return 3;
        default: return 2;
    }
}

std::vector<fs::path> list_input_files(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(in)) {
                if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(in)) {
            files.push_back(in);
        } else {
            throw Error(ErrorCode::InvalidInput, "input '" + in.string() + "' does not exist");
        }
    }
    if (files.empty()) throw Error(ErrorCode::InvalidInput, "no regions found: no CSV input files");
    return files;
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// --- logging ----------------------------------------------------------------

std::string LogEntry::line() const {
    return "region=" + region_id + " stage=" + stage + " code=" + code + " message=" + message;
}

namespace {

std::optional<LogEntry> parse_log_line(const std::string& line) {
    const auto s = line.find(" stage="), c = line.find(" code="), m = line.find(" message=");
    if (line.rfind("region=", 0) != 0 || s == std::string::npos || c == std::string::npos || m == std::string::npos) {
        return std::nullopt;
    }
    return LogEntry{line.substr(7, s - 7), line.substr(s + 7, c - s - 7), line.substr(c + 6, m - c - 6),
                    line.substr(m + 9)};
}

/// Reason code for a soft failure message of the form "CODE: detail".
std::string reason_code(const Error& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    if (colon != std::string::npos && colon > 0 &&
        std::all_of(what.begin(), what.begin() + static_cast<long>(colon),
                    [](char ch) { return std::isupper(static_cast<unsigned char>(ch)) || ch == '_'; })) {
        return what.substr(0, colon);
    }
    switch (e.code()) {
        case ErrorCode::InsufficientData: return "INSUFFICIENT_HISTORY";
        case ErrorCode::Degenerate: return "DEGENERATE_WEEK";
        default: return to_string(e.code());
    }
}

bool is_soft(ErrorCode code) {
    return code == ErrorCode::InsufficientData || code == ErrorCode::Degenerate || code == ErrorCode::FitFailure;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the
/// exception of the lowest failing index.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min(threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

// --- preprocessing ------------------------------------------------------------

const IndexSeries& RegionIndices::index(IndexKind kind) const {
    switch (kind) {
        case IndexKind::Vci: return vci;
        case IndexKind::Vci3m: return vci3m;
        case IndexKind::NdviAnomaly: return ndvi_anomaly;
        case IndexKind::Ndvi: break;
    }
    throw Error(ErrorCode::Config, "NDVI is not a forecastable index");
}

namespace {

struct RegionOutcome {
    std::optional<RegionIndices> indices;
    std::vector<LogEntry> log;
};

WeeklySeries interpolate(const WeeklySeries& raw, const PipelineConfig& cfg, const std::string& rid,
                         std::vector<LogEntry>& log) {
    auto filled = fill_gaps(raw, cfg.gapfill);
    for (const auto& w : filled.warnings) log.push_back({rid, "gapfill", "UNFILLED", w});
    return cfg.smooth ? savitzky_golay(filled.series, cfg.gapfill) : filled.series;
}

RegionOutcome preprocess_region(const std::string& rid, const std::vector<const ObservationSeries*>& pixels,
                                const TimeGrid& grid, const PipelineConfig& cfg) {
    RegionOutcome out;
    std::string stage = "ingest";
    try {
        std::vector<WeeklySeries> composites;
        composites.reserve(pixels.size());
        for (const auto* p : pixels) composites.push_back(composite_weekly(*p, grid));

        std::vector<std::optional<double>> clear(grid.length());
        for (std::size_t i = 0; i < grid.length(); ++i) {
            std::size_t n = 0;
            for (const auto& c : composites) n += c.present(i) ? 1 : 0;
            clear[i] = static_cast<double>(n) / static_cast<double>(composites.size());
        }
        WeeklySeries clear_fraction(grid, std::move(clear));

        if (composites.size() < cfg.min_pixels) {
            throw Error(ErrorCode::InsufficientData, "INSUFFICIENT_PIXELS: " + std::to_string(composites.size()) +
                                                         " pixels, need " + std::to_string(cfg.min_pixels));
        }

        std::optional<WeeklySeries> ndvi;
        std::optional<IndexSeries> vci, anomaly;

        if (cfg.style == PipelineStyle::ModisInterp && cfg.climatology == ClimatologyMode::Pixel) {
            stage = "gapfill";
            std::vector<WeeklySeries> filled;
            for (const auto& c : composites) filled.push_back(interpolate(c, cfg, rid, out.log));
            ndvi = aggregate_mean(filled, cfg.min_pixels);

            stage = "indices";
            std::vector<WeeklySeries> pixel_vci, pixel_anomaly;
            for (std::size_t k = 0; k < filled.size(); ++k) {
                try {
                    const Climatology clim = build_climatology(filled[k]);
                    pixel_vci.push_back(compute_vci(filled[k], clim, rid, cfg.degenerate_week).series.series());
                    pixel_anomaly.push_back(compute_ndvi_anomaly(filled[k], clim, rid).series());
                } catch (const Error& e) {
                    if (!is_soft(e.code())) throw;
                    out.log.push_back({rid, stage, reason_code(e), pixels[k]->pixel_id() + " dropped: " + e.what()});
                }
            }
            if (pixel_vci.size() < cfg.min_pixels) {
                throw Error(ErrorCode::InsufficientData, "INSUFFICIENT_PIXELS: " + std::to_string(pixel_vci.size()) +
                                                             " pixels with a usable climatology, need " +
                                                             std::to_string(cfg.min_pixels));
            }
            vci = IndexSeries(aggregate_mean(pixel_vci, cfg.min_pixels), IndexKind::Vci, rid);
            anomaly = IndexSeries(aggregate_mean(pixel_anomaly, cfg.min_pixels), IndexKind::NdviAnomaly, rid);
        } else {
            const WeeklySeries raw = aggregate_mean(composites, cfg.min_pixels);
            stage = "gapfill";
            if (cfg.style == PipelineStyle::ModisInterp) {
                ndvi = interpolate(raw, cfg, rid, out.log);
            } else {
                std::vector<Sample> samples;
                for (std::size_t i = 0; i < raw.size(); ++i) {
                    if (raw[i]) samples.push_back({grid.date(i), *raw[i], Quality::Good});
                }
                const ObservationSeries mean_obs(rid + "_mean", rid, std::move(samples));
                gp::GapfillOptions opts;
                opts.kernel = gp::Kernel::parse(cfg.gapfill.gp_kernel);
                opts.fit = cfg.gapfill.gp_fit;
                opts.fit.seed = sub_seed(cfg.seed, "gapfill/" + rid);
                auto outcome = gp::gp_gapfill(mean_obs, grid, opts);
                if (!outcome.series) throw Error(ErrorCode::InsufficientData, outcome.reason);
                ndvi = std::move(*outcome.series);
            }
            stage = "indices";
            const Climatology clim = build_climatology(*ndvi);
            vci = compute_vci(*ndvi, clim, rid, cfg.degenerate_week).series;
            anomaly = compute_ndvi_anomaly(*ndvi, clim, rid);
        }
        IndexSeries vci3m = compute_vci3m(*vci, *ndvi);
        out.indices = RegionIndices{rid, std::move(*ndvi), std::move(*vci), std::move(vci3m), std::move(*anomaly),
                                    std::move(clear_fraction)};
    } catch (const Error& e) {
        if (!is_soft(e.code())) {
            throw Error(e.code(), "region " + rid + ", stage " + stage + ": " + e.what());
        }
        out.log.push_back({rid, stage, reason_code(e), std::string("region skipped: ") + e.what()});
    }
    return out;
}

}  // namespace

PreprocessOutput preprocess(const std::vector<ObservationSeries>& observations, const PipelineConfig& cfg) {
    if (observations.empty()) throw Error(ErrorCode::InvalidInput, "no regions found: no observations");
    std::map<std::string, std::vector<const ObservationSeries*>> by_region;
    for (const auto& o : observations) by_region[o.region_id()].push_back(&o);
    const TimeGrid grid = grid_for(observations);

    std::vector<std::string> ids;
    for (const auto& [rid, _] : by_region) ids.push_back(rid);
    std::vector<RegionOutcome> outcomes(ids.size());
    parallel_for(ids.size(), cfg.threads,
                 [&](std::size_t i) { outcomes[i] = preprocess_region(ids[i], by_region[ids[i]], grid, cfg); });

    PreprocessOutput out;
    for (auto& o : outcomes) {
        out.log.insert(out.log.end(), o.log.begin(), o.log.end());
        if (o.indices) out.regions.push_back(std::move(*o.indices));
    }
    return out;
}

// --- forecasting --------------------------------------------------------------

std::vector<eval::ForecastRecord> forecast_region(const RegionIndices& region, const PipelineConfig& cfg,
                                                  std::vector<LogEntry>* log) {
    return forecast_series(region.index(cfg.index), &region.clear_fraction, cfg, log);
}

std::vector<eval::ForecastRecord> forecast_series(const IndexSeries& series, const WeeklySeries* clear_fraction,
                                                  const PipelineConfig& cfg, std::vector<LogEntry>* log,
                                                  std::optional<std::size_t> only_slot) {
    const std::string& region_id = series.region_id();
    const auto& s = series.series();
    const TimeGrid& grid = s.grid();
    const std::size_t burn = cfg.effective_burn_in();
    auto has = [&](eval::Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };

    std::vector<std::size_t> leads = cfg.leads;
    std::sort(leads.begin(), leads.end());
    leads.erase(std::unique(leads.begin(), leads.end()), leads.end());

    std::vector<eval::ForecastRecord> out;
    std::map<std::string, std::size_t> skipped;  // "METHOD lead n: REASON" -> count

    auto make = [&](std::size_t t, std::size_t lead, eval::Method m, double predicted) {
        eval::ForecastRecord r;
        r.region_id = region_id;
        r.issue_date = grid.date(t);
        r.lead = lead;
        r.predicted = predicted;
        r.truth = *s[t + lead];
        r.method = m;
        r.kind = series.kind();
        r.truth_at_issue = s[t];
        if (clear_fraction) r.clear_fraction = (*clear_fraction)[t];
        return r;
    };
    auto skip = [&](eval::Method m, std::size_t lead, const std::string& reason) {
        const auto code = reason.substr(0, reason.find(':'));
        ++skipped[std::string(eval::to_string(m)) + " lead " + std::to_string(lead) + ": " + code];
    };

    std::size_t issue_index = 0;
    for (std::size_t t = only_slot.value_or(burn); t < s.size(); t += cfg.issue_stride, ++issue_index) {
        if (only_slot && t != *only_slot) break;
        const Date issue = grid.date(t);
        std::vector<std::size_t> valid;
        for (auto lead : leads) {
            if (t + lead < s.size() && s[t + lead]) valid.push_back(lead);
        }
        if (valid.empty()) continue;

        if (has(eval::Method::Ar)) {
            for (auto lead : valid) {
                ar::ARConfig a = cfg.ar;
                a.lead = lead;
                const auto f = ar::ar_forecast(series, issue, a);
                if (f.value) out.push_back(make(t, lead, eval::Method::Ar, *f.value));
                else skip(eval::Method::Ar, lead, ar::to_string(f.reason));
            }
        }
        if (has(eval::Method::Gp) && issue_index % cfg.gp_issue_stride == 0) {
            gp::GpForecastOptions opts = cfg.gp;
            opts.fit.seed = sub_seed(cfg.seed, "gp/" + region_id + "/" + format_date(issue));
            const auto fs_ = gp::gp_forecast_leads(series, issue, valid, opts);
            for (std::size_t k = 0; k < valid.size(); ++k) {
                if (fs_[k].value) out.push_back(make(t, valid[k], eval::Method::Gp, fs_[k].value->mean));
                else skip(eval::Method::Gp, valid[k], fs_[k].reason);
            }
        }
        if (has(eval::Method::Persistence)) {
            for (auto lead : valid) {
                const auto f = ar::persistence_forecast(series, issue, lead);
                if (f.value) out.push_back(make(t, lead, eval::Method::Persistence, *f.value));
                else skip(eval::Method::Persistence, lead, ar::to_string(f.reason));
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const eval::ForecastRecord& a, const eval::ForecastRecord& b) {
        return std::tie(a.lead, a.method, a.issue_date) < std::tie(b.lead, b.method, b.issue_date);
    });
    if (log) {
        for (const auto& [what, count] : skipped) {
            const auto colon = what.rfind(": ");
            log->push_back({region_id, "forecast", what.substr(colon + 2),
                            std::to_string(count) + " issue weeks skipped for " + what.substr(0, colon)});
        }
    }
    return out;
}

// --- record and report files ----------------------------------------------------

void write_records_csv(std::ostream& out, const std::vector<eval::ForecastRecord>& records) {
    out << "region_id,issue_date,lead,method,kind,predicted,truth,truth_at_issue,clear_fraction\n";
    for (const auto& r : records) {
        out << r.region_id << ',' << format_date(r.issue_date) << ',' << r.lead << ',' << eval::to_string(r.method)
            << ',' << to_string(r.kind) << ',' << format_double(r.predicted) << ',' << format_double(r.truth) << ','
            << (r.truth_at_issue ? format_double(*r.truth_at_issue) : "") << ','
            << (r.clear_fraction ? format_double(*r.clear_fraction) : "") << '\n';
    }
}

std::vector<eval::ForecastRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "empty forecast file");
    const auto header = split_csv_line(line);
    const std::vector<std::string_view> expected{"region_id", "issue_date", "lead",           "method",        "kind",
                                                 "predicted", "truth",      "truth_at_issue", "clear_fraction"};
    if (header != expected) throw Error(ErrorCode::Parse, "line 1: unexpected forecast header");
    std::vector<eval::ForecastRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        try {
            if (f.size() != expected.size()) throw Error(ErrorCode::Parse, "expected 9 fields");
            eval::ForecastRecord r;
            r.region_id = std::string(f[0]);
            r.issue_date = parse_date(f[1]);
            const double lead = parse_double(f[2]);
            if (!(lead >= 1.0) || lead != std::floor(lead)) throw Error(ErrorCode::Parse, "lead must be a positive integer");
            r.lead = static_cast<std::size_t>(lead);
            r.method = eval::parse_method(f[3]);
            r.kind = parse_index_kind(f[4]);
            r.predicted = parse_double(f[5]);
            r.truth = parse_double(f[6]);
            if (!std::isfinite(r.predicted) || !std::isfinite(r.truth)) {
                throw Error(ErrorCode::InvalidValue, "predicted and truth must be finite");
            }
            if (!f[7].empty()) r.truth_at_issue = parse_double(f[7]);
            if (!f[8].empty()) r.clear_fraction = parse_double(f[8]);
            out.push_back(std::move(r));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
    return f;
}

std::string lead_dir(std::size_t lead) {
    std::ostringstream s;
    s << "lead_" << std::setw(2) << std::setfill('0') << lead;
    return s.str();
}

}  // namespace

void write_reports(const fs::path& dir, const std::vector<eval::ForecastRecord>& records,
                   const std::vector<IndexSeries>& series, const PipelineConfig& cfg) {
    std::vector<std::size_t> leads = cfg.leads;
    std::sort(leads.begin(), leads.end());
    leads.erase(std::unique(leads.begin(), leads.end()), leads.end());
    const bool vci_like = cfg.index == IndexKind::Vci || cfg.index == IndexKind::Vci3m;
    const auto grid = eval::default_binarization_grid();

    nlohmann::json summary;
    summary["index"] = to_string(cfg.index);
    summary["leads"] = nlohmann::json::array();

    for (auto lead : leads) {
        const fs::path ld = dir / lead_dir(lead);
        fs::create_directories(ld);
        nlohmann::json lj;
        lj["lead"] = lead;
        lj["methods"] = nlohmann::json::array();

        std::map<eval::Method, std::vector<eval::ForecastRecord>> by_method;
        for (const auto& r : records) {
            if (r.lead == lead) by_method[r.method].push_back(r);
        }
        const auto pers_it = by_method.find(eval::Method::Persistence);

        for (auto method : cfg.methods) {
            const auto& recs = by_method[method];
            const std::string mname = eval::to_string(method);
            nlohmann::json mj;
            mj["method"] = mname;
            mj["records"] = recs.size();
            nlohmann::json notes = nlohmann::json::array();
            auto guarded = [&](const char* what, const std::function<void()>& fn) {
                try {
                    fn();
                } catch (const Error& e) {
                    notes.push_back(std::string(what) + ": " + e.what());
                }
            };
            mj["r2"] = nullptr;
            mj["s"] = nullptr;
            mj["rmse"] = nullptr;
            mj["bias"] = nullptr;
            mj["persistence_ratio_pct"] = nullptr;
            mj["roc_auc"] = nullptr;
            guarded("r2", [&] { mj["r2"] = opt_json(eval::r2_score(recs)); });
            guarded("s", [&] { mj["s"] = opt_json(eval::s_metric(recs)); });
            guarded("rmse", [&] { mj["rmse"] = eval::rmse(recs); });
            guarded("bias", [&] {
                if (const auto b = eval::bias_regression(recs)) {
                    mj["bias"] = {{"slope", b->slope.value},
                                  {"slope_stderr", b->slope.stderr_},
                                  {"intercept", b->intercept.value},
                                  {"intercept_stderr", b->intercept.stderr_}};
                }
            });
            if (method != eval::Method::Persistence && pers_it != by_method.end()) {
                const auto pr = eval::persistence_ratio(recs, pers_it->second);
                mj["persistence_ratio_pct"] = opt_json(pr.ratio_pct);
                mj["persistence_matched"] = pr.matched;
            }

            if (vci_like) {
                guarded("roc", [&] {
                    const auto roc = eval::roc_curve(recs, kDroughtAlertThreshold, grid);
                    mj["roc_auc"] = eval::roc_auc(roc);
                    auto f = open_out(ld / ("roc_" + mname + ".csv"));
                    f << "threshold,hit_rate,false_alarm_rate,tp,fp,tn,fn\n";
                    for (const auto& p : roc) {
                        f << format_double(p.threshold) << ',' << format_double(p.hit_rate) << ','
                          << format_double(p.false_alarm_rate) << ',' << p.tp << ',' << p.fp << ',' << p.tn << ','
                          << p.fn << '\n';
                    }
                });
                const auto ts = eval::transition_skill(recs, kDroughtAlertThreshold, grid);
                mj["transitions"] = ts.transitions;
                mj["normal_at_issue"] = ts.normal_at_issue;
                for (const auto& p : ts.points) {
                    if (p.threshold == kDroughtAlertThreshold) {
                        mj["transition_hit_rate"] = opt_json(p.hit_rate);
                        mj["transition_false_alarm_ratio"] = opt_json(p.false_alarm_ratio);
                    }
                }
                auto f = open_out(ld / ("transition_" + mname + ".csv"));
                f << "threshold,hit_rate,false_alarm_ratio,hits,misses,false_alarms,correct_negatives\n";
                for (const auto& p : ts.points) {
                    f << format_double(p.threshold) << ',' << (p.hit_rate ? format_double(*p.hit_rate) : "") << ','
                      << (p.false_alarm_ratio ? format_double(*p.false_alarm_ratio) : "") << ',' << p.hits << ','
                      << p.misses << ',' << p.false_alarms << ',' << p.correct_negatives << '\n';
                }
            }

            const std::vector<eval::Breakdown> breakdowns =
                vci_like ? std::vector<eval::Breakdown>{eval::Breakdown::Category, eval::Breakdown::WeekOfYear,
                                                        eval::Breakdown::Region}
                         : std::vector<eval::Breakdown>{eval::Breakdown::WeekOfYear, eval::Breakdown::Region};
            for (auto by : breakdowns) {
                auto f = open_out(ld / ("breakdown_" + std::string(eval::to_string(by)) + "_" + mname + ".csv"));
                f << "bucket,count,rmse\n";
                for (const auto& row : eval::breakdown_rmse(recs, by)) {
                    f << row.bucket << ',' << row.count << ',' << format_double(row.rmse) << '\n';
                }
            }

            const auto cp = eval::clear_pixel_correlation(recs);
            mj["clear_pixel_pearson_r"] = opt_json(cp.pearson_r);
            {
                auto f = open_out(ld / ("clear_pixel_" + mname + ".csv"));
                f << "clear_pct,count,rmse\n";
                for (const auto& b : cp.buckets) f << b.pct << ',' << b.count << ',' << format_double(b.rmse) << '\n';
            }
            mj["notes"] = notes;
            lj["methods"].push_back(mj);
        }
        summary["leads"].push_back(lj);
    }

    if (!series.empty()) {
        auto f = open_out(dir / "coverage.csv");
        f << "region_id,lead,assessed,forecastable,pct\n";
        nlohmann::json cov = nlohmann::json::array();
        for (auto lead : leads) {
            ar::ARConfig a = cfg.ar;
            a.lead = lead;
            for (const auto& row : eval::coverage_report(series, a, cfg.effective_burn_in())) {
                f << row.region_id << ',' << lead << ',' << row.assessed << ',' << row.forecastable << ','
                  << format_double(row.pct) << '\n';
                cov.push_back({{"region_id", row.region_id}, {"lead", lead}, {"pct", row.pct}});
            }
        }
        summary["coverage"] = cov;
    }
    auto f = open_out(dir / "summary.json");
    f << summary.dump(2) << '\n';
}

// --- full run -------------------------------------------------------------------

namespace {

const std::set<std::string>& preprocess_keys() {
    static const std::set<std::string> keys{"style",        "climatology",  "degenerate_week", "min_pixels",
                                            "value_scale",  "l_max",        "interpolator",    "savgol_window",
                                            "savgol_order", "smooth",       "gp_kernel",       "gp_restarts",
                                            "gp_max_iterations", "seed"};
    return keys;
}

std::string cache_key(const PipelineConfig& cfg, const std::vector<fs::path>& files) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    std::istringstream text(cfg.to_text());
    std::string line;
    while (std::getline(text, line)) {
        if (preprocess_keys().contains(line.substr(0, line.find('=')))) mix(line + "\n");
    }
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        mix(buf.str());
        mix(std::string_view("\0", 1));
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

struct SeriesFiles {
    RegionalSeries ndvi, vci, vci3m, anomaly, clear;
};

SeriesFiles collect(const std::vector<RegionIndices>& regions) {
    SeriesFiles s;
    for (const auto& r : regions) {
        s.ndvi.emplace(r.region_id, r.ndvi);
        s.vci.emplace(r.region_id, r.vci.series());
        s.vci3m.emplace(r.region_id, r.vci3m.series());
        s.anomaly.emplace(r.region_id, r.ndvi_anomaly.series());
        s.clear.emplace(r.region_id, r.clear_fraction);
    }
    return s;
}

void save_series(const fs::path& dir, const std::vector<RegionIndices>& regions) {
    fs::create_directories(dir);
    const SeriesFiles s = collect(regions);
    save_regional_csv(dir / "ndvi.csv", s.ndvi);
    save_regional_csv(dir / "vci.csv", s.vci);
    save_regional_csv(dir / "vci3m.csv", s.vci3m);
    save_regional_csv(dir / "ndvi_anomaly.csv", s.anomaly);
    save_regional_csv(dir / "clear_fraction.csv", s.clear);
}

std::vector<RegionIndices> load_series(const fs::path& dir) {
    const auto ndvi = load_regional_csv(dir / "ndvi.csv");
    const auto vci = load_regional_csv(dir / "vci.csv");
    const auto vci3m = load_regional_csv(dir / "vci3m.csv");
    const auto anomaly = load_regional_csv(dir / "ndvi_anomaly.csv");
    const auto clear = load_regional_csv(dir / "clear_fraction.csv");
    std::vector<RegionIndices> out;
    for (const auto& [rid, n] : ndvi) {
        out.push_back(RegionIndices{rid, n, IndexSeries(vci.at(rid), IndexKind::Vci, rid),
                                    IndexSeries(vci3m.at(rid), IndexKind::Vci3m, rid),
                                    IndexSeries(anomaly.at(rid), IndexKind::NdviAnomaly, rid), clear.at(rid)});
    }
    return out;
}

void write_log(const fs::path& path, const std::vector<LogEntry>& log) {
    auto f = open_out(path);
    for (const auto& e : log) f << e.line() << '\n';
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    PipelineResult result;
    std::string stage = "config";
    try {
        cfg.validate();
        stage = "ingest";
        const auto files = list_input_files(cfg.inputs);
        const fs::path cache_dir = cfg.output_dir / "cache" / cache_key(cfg, files);

        std::vector<RegionIndices> regions;
        std::vector<LogEntry> log;
        if (cfg.cache && fs::exists(cache_dir / "complete")) {
            regions = load_series(cache_dir);
            std::ifstream in(cache_dir / "preprocess_log.txt");
            std::string line;
            while (std::getline(in, line)) {
                if (auto e = parse_log_line(line)) log.push_back(std::move(*e));
            }
            result.cache_hit = true;
        } else {
            std::vector<ObservationSeries> observations;
            std::set<std::string> pixel_ids;
            for (const auto& f : files) {
                auto obs = load_observations(f, cfg.schema);
                for (auto& o : obs) {
                    if (!pixel_ids.insert(o.pixel_id()).second) {
                        throw Error(ErrorCode::Duplicate, "pixel " + o.pixel_id() + " appears in more than one file");
                    }
                    observations.push_back(std::move(o));
                }
            }
            if (observations.empty()) throw Error(ErrorCode::InvalidInput, "no regions found in the input files");
            stage = "preprocess";
            auto pre = preprocess(observations, cfg);
            regions = std::move(pre.regions);
            log = std::move(pre.log);
            if (cfg.cache) {
                save_series(cache_dir, regions);
                write_log(cache_dir / "preprocess_log.txt", log);
                open_out(cache_dir / "complete") << "ok\n";
            }
        }
        if (regions.empty()) {
            throw Error(ErrorCode::InsufficientData, "no usable regions: every region failed preprocessing");
        }

        stage = "forecast";
        std::vector<std::vector<eval::ForecastRecord>> per_region(regions.size());
        std::vector<std::vector<LogEntry>> per_log(regions.size());
        parallel_for(regions.size(), cfg.threads,
                     [&](std::size_t i) { per_region[i] = forecast_region(regions[i], cfg, &per_log[i]); });
        std::vector<eval::ForecastRecord> records;
        for (std::size_t i = 0; i < regions.size(); ++i) {
            records.insert(records.end(), per_region[i].begin(), per_region[i].end());
            log.insert(log.end(), per_log[i].begin(), per_log[i].end());
        }
        std::stable_sort(records.begin(), records.end(), [](const eval::ForecastRecord& a, const eval::ForecastRecord& b) {
            return std::tie(a.region_id, a.lead, a.method, a.issue_date) <
                   std::tie(b.region_id, b.lead, b.method, b.issue_date);
        });

        stage = "evaluate";
        fs::create_directories(cfg.output_dir);
        open_out(cfg.output_dir / "config.txt") << cfg.to_text();
        save_series(cfg.output_dir / "series", regions);
        {
            auto f = open_out(cfg.output_dir / "forecasts.csv");
            write_records_csv(f, records);
        }
        std::vector<IndexSeries> index_series;
        for (const auto& r : regions) index_series.push_back(r.index(cfg.index));
        write_reports(cfg.output_dir / "report", records, index_series, cfg);
        write_log(cfg.output_dir / "log.txt", log);

        result.log = std::move(log);
        result.regions = regions.size();
        result.records = records.size();
        result.exit_code = 0;
    } catch (const Error& e) {
        result.exit_code = exit_code_for(e.code());
        result.log.push_back({"-", stage, reason_code(e), e.what()});
    } catch (const std::exception& e) {
        result.exit_code = 2;
        result.log.push_back({"-", stage, "IO", e.what()});
    }
    if (result.exit_code != 0 && !cfg.output_dir.empty()) {
        try {
            write_log(cfg.output_dir / "log.txt", result.log);
        } catch (...) {
        }
    }
    return result;
}

}  // namespace vegcast
