#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vegcast/ar.hpp"
#include "vegcast/evaluate.hpp"
#include "vegcast/gapfill.hpp"
#include "vegcast/gp.hpp"
#include "vegcast/indices.hpp"
#include "vegcast/ingest.hpp"

namespace vegcast {

enum class PipelineStyle {
    LandsatGp,    // GP gap-filling of the regional composite
    ModisInterp,  // interpolation of short gaps plus Savitzky-Golay smoothing
};
const char* to_string(PipelineStyle s);
PipelineStyle parse_pipeline_style(std::string_view text);

enum class ClimatologyMode {
    Pixel,     // VCI per pixel, then averaged over the region
    Regional,  // VCI from the regional mean NDVI
};

struct PipelineConfig {
    std::vector<std::filesystem::path> inputs;  // files or directories of *.csv
    std::filesystem::path output_dir;
    PipelineStyle style = PipelineStyle::ModisInterp;
    CsvSchema schema;
    std::size_t min_pixels = 25;
    GapFillConfig gapfill;
    bool smooth = true;
    ClimatologyMode climatology = ClimatologyMode::Pixel;
    DegenerateWeekPolicy degenerate_week = DegenerateWeekPolicy::Error;

    IndexKind index = IndexKind::Vci3m;
    std::vector<eval::Method> methods{eval::Method::Ar, eval::Method::Gp, eval::Method::Persistence};
    std::vector<std::size_t> leads{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    ar::ARConfig ar;
    gp::GpForecastOptions gp;
    /// GP forecasts are issued on every k-th assessment week.
    std::size_t gp_issue_stride = 1;
    std::size_t issue_stride = 1;
    /// First assessed issue slot; defaults to T + 52.
    std::optional<std::size_t> burn_in;

    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool cache = true;

    std::size_t effective_burn_in() const { return burn_in.value_or(ar.train_length + 52); }

    /// Throws Error(Config) on invalid settings.
    void validate() const;

    /// Sets one key from its text form. Throws Error(Config) for unknown keys
    /// or malformed values.
    void set(const std::string& key, const std::string& value);

    /// Every key with its current value, one `key=value` per line, in a fixed order.
    std::string to_text() const;
};

/// Names accepted by PipelineConfig::set, in to_text order.
const std::vector<std::string>& config_keys();

/// Parses `key=value` lines; `#` starts a comment.
std::map<std::string, std::string> read_config_text(std::istream& in);

/// 0 success, 1 usage, 2 data, 3 numerical.
int exit_code_for(ErrorCode code);

/// Expands directories to their *.csv files (sorted). Throws Error(InvalidInput)
/// when nothing is found.
std::vector<std::filesystem::path> list_input_files(const std::vector<std::filesystem::path>& inputs);

struct RegionIndices {
    std::string region_id;
    WeeklySeries ndvi;
    IndexSeries vci;
    IndexSeries vci3m;
    IndexSeries ndvi_anomaly;
    /// Fraction of pixels with a good sample in each week.
    WeeklySeries clear_fraction;

    const IndexSeries& index(IndexKind kind) const;
};

/// One structured log line: `region=... stage=... code=... message=...`.
struct LogEntry {
    std::string region_id;
    std::string stage;
    std::string code;
    std::string message;

    std::string line() const;
};

struct PreprocessOutput {
    std::vector<RegionIndices> regions;  // sorted by region_id
    std::vector<LogEntry> log;
};

/// Ingest, gap-fill and index stages for every region in `observations`.
/// Regions that fail for lack of data are logged and left out.
PreprocessOutput preprocess(const std::vector<ObservationSeries>& observations, const PipelineConfig& cfg);

/// All forecasts for one index series, sorted by (lead, method, issue date).
/// Issue weeks run from the burn-in to the end of the grid, or only `only_slot`.
std::vector<eval::ForecastRecord> forecast_series(const IndexSeries& series, const WeeklySeries* clear_fraction,
                                                  const PipelineConfig& cfg, std::vector<LogEntry>* log = nullptr,
                                                  std::optional<std::size_t> only_slot = std::nullopt);

std::vector<eval::ForecastRecord> forecast_region(const RegionIndices& region, const PipelineConfig& cfg,
                                                  std::vector<LogEntry>* log = nullptr);

/// `region_id,issue_date,lead,method,kind,predicted,truth,truth_at_issue,clear_fraction`.
void write_records_csv(std::ostream& out, const std::vector<eval::ForecastRecord>& records);
std::vector<eval::ForecastRecord> read_records_csv(std::istream& in);

/// summary.json plus per-lead CSV tables under `dir`. Coverage is written
/// when `series` is non-empty.
void write_reports(const std::filesystem::path& dir, const std::vector<eval::ForecastRecord>& records,
                   const std::vector<IndexSeries>& series, const PipelineConfig& cfg);

struct PipelineResult {
    int exit_code = 0;
    std::vector<LogEntry> log;
    std::size_t regions = 0;
    std::size_t records = 0;
    bool cache_hit = false;
};

/// Full run; writes the report bundle to cfg.output_dir. Never throws for
/// data or numerical failures: they are mapped to an exit code and logged.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Deterministic 64-bit sub-seed derived from the config seed and a name.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view name);

}  // namespace vegcast
