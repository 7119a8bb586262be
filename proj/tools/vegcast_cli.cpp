// vegcast command-line tool: ingest, gapfill, indices, forecast, evaluate,
// granger, synth and run (the full pipeline).

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vegcast/pipeline.hpp"
#include "vegcast/synth.hpp"

namespace fs = std::filesystem;
using namespace vegcast;

namespace {

const std::map<std::string, std::string>& key_help() {
    static const std::map<std::string, std::string> help{
        {"input", "observation CSV files or directories (comma separated)"},
        {"output_dir", "directory for the report bundle"},
        {"style", "LANDSAT_GP or MODIS_INTERP"},
        {"climatology", "pixel or regional"},
        {"degenerate_week", "error or midpoint"},
        {"min_pixels", "pixels needed for a regional weekly value"},
        {"value_scale", "divide raw NDVI values by this"},
        {"l_max", "longest gap (weeks) that is interpolated"},
        {"interpolator", "QUADRATIC, LINEAR, CUBIC, LAST_VALUE, MEAN_VALUE or GP"},
        {"savgol_window", "Savitzky-Golay window length (odd)"},
        {"savgol_order", "Savitzky-Golay polynomial order"},
        {"smooth", "apply Savitzky-Golay smoothing after interpolation"},
        {"gp_kernel", "kernel structure for GP gap-filling"},
        {"gp_restarts", "optimizer restarts per GP fit"},
        {"gp_max_iterations", "optimizer iterations per restart"},
        {"gp_history_weeks", "GP forecast training window (0 = all history)"},
        {"gp_min_history", "present values needed for a GP forecast"},
        {"gp_issue_stride", "issue a GP forecast every k-th assessment week"},
        {"index", "VCI3M, VCI or NDVI_ANOMALY"},
        {"methods", "forecasters: AR, GP, PERSISTENCE (comma separated)"},
        {"leads", "lead times in weeks (comma separated)"},
        {"ar_order", "AR order p"},
        {"ar_train_length", "AR training window T"},
        {"ar_demean", "subtract the window mean before fitting"},
        {"ar_strict_window", "require a gap-free training window"},
        {"ar_min_valid_fraction", "usable-row fraction needed in a non-strict window"},
        {"issue_stride", "assess every k-th issue week"},
        {"burn_in", "first assessed issue week (auto = T + 52)"},
        {"seed", "root random seed"},
        {"threads", "worker threads (regions in parallel)"},
        {"cache", "reuse cached preprocessing results"},
    };
    return help;
}

/// Extra spellings accepted for some keys.
const std::map<std::string, std::string>& key_aliases() {
    static const std::map<std::string, std::string> aliases{
        {"gp_kernel", "--kernel"},         {"gp_restarts", "--restarts"},          {"ar_order", "--order"},
        {"ar_train_length", "--train-length"}, {"ar_demean", "--demean"},       {"ar_strict_window", "--strict-window"},
    };
    return aliases;
}

std::string option_names(const std::string& key) {
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    if (const auto it = key_aliases().find(key); it != key_aliases().end()) names += "," + it->second;
    return names;
}

/// Config keys exposed as `--key` options on a subcommand.
struct KeyOptions {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void add(CLI::App* app, const std::vector<std::string>& keys) {
        for (const auto& k : keys) {
            auto* opt = app->add_option(option_names(k), values[k], key_help().at(k));
            options.emplace_back(k, opt);
        }
    }

    bool given(const std::string& key) const {
        for (const auto& [k, opt] : options) {
            if (k == key) return opt->count() > 0;
        }
        return false;
    }

    void apply(PipelineConfig& cfg) const {
        for (const auto& [k, opt] : options) {
            if (opt->count() > 0) cfg.set(k, values.at(k));
        }
    }
};

const std::vector<std::string> kArKeys{"ar_order", "ar_train_length", "ar_demean", "ar_strict_window",
                                       "ar_min_valid_fraction"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
    return f;
}

std::vector<IndexSeries> load_index_series(const fs::path& path, IndexKind kind) {
    std::vector<IndexSeries> out;
    for (auto& [rid, s] : load_regional_csv(path)) out.emplace_back(s, kind, rid);
    if (out.empty()) throw Error(ErrorCode::InvalidInput, "no regions found in " + path.string());
    return out;
}

int cmd_ingest(const std::vector<std::string>& inputs, const fs::path& output, const fs::path& clear_output,
               const KeyOptions& keys) {
    PipelineConfig cfg;
    keys.apply(cfg);
    std::vector<fs::path> paths(inputs.begin(), inputs.end());
    std::vector<ObservationSeries> obs;
    for (const auto& f : list_input_files(paths)) {
        auto part = load_observations(f, cfg.schema);
        obs.insert(obs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (obs.empty()) throw Error(ErrorCode::InvalidInput, "no regions found");
    const TimeGrid grid = grid_for(obs);
    std::map<std::string, std::vector<WeeklySeries>> composites;
    for (const auto& o : obs) composites[o.region_id()].push_back(composite_weekly(o, grid));

    RegionalSeries ndvi, clear;
    for (const auto& [rid, pixels] : composites) {
        if (pixels.size() < cfg.min_pixels) {
            std::cerr << "region=" << rid << " stage=ingest code=INSUFFICIENT_PIXELS message=" << pixels.size()
                      << " pixels, need " << cfg.min_pixels << '\n';
        }
        ndvi.emplace(rid, aggregate_mean(pixels, cfg.min_pixels));
        std::vector<std::optional<double>> frac(grid.length());
        for (std::size_t i = 0; i < grid.length(); ++i) {
            std::size_t n = 0;
            for (const auto& p : pixels) n += p.present(i) ? 1 : 0;
            frac[i] = static_cast<double>(n) / static_cast<double>(pixels.size());
        }
        clear.emplace(rid, WeeklySeries(grid, std::move(frac)));
    }
    save_regional_csv(output, ndvi);
    if (!clear_output.empty()) save_regional_csv(clear_output, clear);
    std::cerr << "ingested " << obs.size() << " pixels in " << ndvi.size() << " regions over " << grid.length()
              << " weeks\n";
    return 0;
}

int cmd_gapfill(const fs::path& input, const fs::path& output, const KeyOptions& keys) {
    PipelineConfig cfg;
    keys.apply(cfg);
    cfg.gapfill.validate();
    RegionalSeries out;
    for (const auto& [rid, s] : load_regional_csv(input)) {
        GapFillConfig gcfg = cfg.gapfill;
        gcfg.gp_fit.seed = sub_seed(cfg.seed, "gapfill/" + rid);
        auto filled = fill_gaps(s, gcfg);
        for (const auto& w : filled.warnings) {
            std::cerr << "region=" << rid << " stage=gapfill code=UNFILLED message=" << w << '\n';
        }
        out.emplace(rid, cfg.smooth ? savitzky_golay(filled.series, gcfg) : filled.series);
    }
    save_regional_csv(output, out);
    return 0;
}

int cmd_indices(const fs::path& input, const fs::path& output_dir, const KeyOptions& keys) {
    PipelineConfig cfg;
    keys.apply(cfg);
    RegionalSeries vci, vci3m, anomaly;
    fs::create_directories(output_dir);
    for (const auto& [rid, ndvi] : load_regional_csv(input)) {
        try {
            const Climatology clim = build_climatology(ndvi);
            auto v = compute_vci(ndvi, clim, rid, cfg.degenerate_week);
            if (v.clipped > 0) {
                std::cerr << "region=" << rid << " stage=indices code=CLIPPED message=" << v.clipped
                          << " VCI values clipped to [0, 100]\n";
            }
            vci3m.emplace(rid, compute_vci3m(v.series, ndvi).series());
            anomaly.emplace(rid, compute_ndvi_anomaly(ndvi, clim, rid).series());
            vci.emplace(rid, v.series.series());
            auto f = open_output(output_dir / ("climatology_" + rid + ".csv"));
            write_climatology_csv(f, clim);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::Degenerate) throw;
            std::cerr << "region=" << rid << " stage=indices code="
                      << (e.code() == ErrorCode::Degenerate ? "DEGENERATE_WEEK" : "INSUFFICIENT_HISTORY")
                      << " message=" << e.what() << '\n';
        }
    }
    if (vci.empty()) throw Error(ErrorCode::InsufficientData, "no region produced indices");
    save_regional_csv(output_dir / "vci.csv", vci);
    save_regional_csv(output_dir / "vci3m.csv", vci3m);
    save_regional_csv(output_dir / "ndvi_anomaly.csv", anomaly);
    return 0;
}

int cmd_forecast(const fs::path& input, const fs::path& output, const std::string& issue_date,
                 const fs::path& clear_path, const KeyOptions& keys) {
    PipelineConfig cfg;
    cfg.inputs = {input};
    cfg.output_dir = output;
    keys.apply(cfg);
    cfg.validate();
    RegionalSeries clear;
    if (!clear_path.empty()) clear = load_regional_csv(clear_path);

    std::vector<eval::ForecastRecord> records;
    std::vector<LogEntry> log;
    for (const auto& series : load_index_series(input, cfg.index)) {
        std::optional<std::size_t> only;
        if (!issue_date.empty()) {
            only = series.series().grid().slot_at(parse_date(issue_date));
            if (!only) throw Error(ErrorCode::OutOfRange, "issue date " + issue_date + " is not on the weekly grid");
        }
        const auto it = clear.find(series.region_id());
        const WeeklySeries* cf = it == clear.end() ? nullptr : &it->second;
        auto part = forecast_series(series, cf, cfg, &log, only);
        records.insert(records.end(), part.begin(), part.end());
    }
    for (const auto& e : log) std::cerr << e.line() << '\n';
    auto f = open_output(output);
    write_records_csv(f, records);
    std::cerr << "wrote " << records.size() << " forecasts\n";
    return 0;
}

int cmd_evaluate(const fs::path& input, const fs::path& output_dir, const fs::path& series_path,
                 const KeyOptions& keys) {
    std::ifstream in(input);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot read " + input.string());
    const auto records = read_records_csv(in);
    if (records.empty()) throw Error(ErrorCode::InsufficientData, "no forecast records in " + input.string());

    PipelineConfig cfg;
    cfg.index = records.front().kind;
    std::set<eval::Method> methods;
    std::set<std::size_t> leads;
    for (const auto& r : records) {
        methods.insert(r.method);
        leads.insert(r.lead);
    }
    cfg.methods.assign(methods.begin(), methods.end());
    cfg.leads.assign(leads.begin(), leads.end());
    keys.apply(cfg);

    std::vector<IndexSeries> series;
    if (!series_path.empty()) series = load_index_series(series_path, cfg.index);
    write_reports(output_dir, records, series, cfg);
    return 0;
}

int cmd_granger(const fs::path& input, const fs::path& output, std::size_t lead, std::size_t source_lags,
                double threshold, std::size_t stride, const KeyOptions& keys) {
    PipelineConfig cfg;
    keys.apply(cfg);
    ar::GrangerConfig g;
    g.ar = cfg.ar;
    g.ar.lead = lead;
    g.source_lags = source_lags;
    g.threshold_pct = threshold;
    g.window_stride = stride;
    const auto series = load_index_series(input, cfg.index);
    const auto m = ar::granger_matrix(series, g);
    auto f = open_output(output);
    f << "from,to,mean_pct_reduction,windows,flagged\n";
    for (const auto& e : m.all_pairs) {
        f << e.from << ',' << e.to << ',' << format_double(e.mean_pct_reduction) << ',' << e.windows << ','
          << (e.mean_pct_reduction >= threshold ? "true" : "false") << '\n';
    }
    for (const auto& [e, reason] : m.absent) {
        std::cerr << "pair=" << e.from << "->" << e.to << " code=GAP message=" << reason << '\n';
    }
    std::cerr << m.entries.size() << " of " << m.all_pairs.size() << " pairs reach " << threshold << "%\n";
    return 0;
}

synth::Coupling parse_coupling(const std::string& text) {
    const auto a = text.find(':'), b = text.rfind(':');
    if (a == std::string::npos || a == b) {
        throw Error(ErrorCode::Config, "coupling '" + text + "' must look like FROM:TO:B (1-based regions)");
    }
    const double from = parse_double(text.substr(0, a)), to = parse_double(text.substr(a + 1, b - a - 1));
    if (from < 1 || to < 1) throw Error(ErrorCode::Config, "coupling regions are 1-based");
    return {static_cast<std::size_t>(from) - 1, static_cast<std::size_t>(to) - 1, parse_double(text.substr(b + 1))};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vegetation condition forecasting: gap-filling, VCI/VCI3M indices, GP and AR forecasts, skill reports"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Aggregate pixel observations into regional weekly NDVI");
    std::vector<std::string> ingest_inputs;
    fs::path ingest_out, ingest_clear;
    KeyOptions ingest_keys;
    ingest->add_option("--input", ingest_inputs, "observation CSV files or directories")->required();
    ingest->add_option("--output", ingest_out, "regional NDVI CSV")->required();
    ingest->add_option("--clear_output", ingest_clear, "regional clear-pixel fraction CSV");
    ingest_keys.add(ingest, {"min_pixels", "value_scale"});

    // gapfill
    auto* gapfill = app.add_subcommand("gapfill", "Interpolate short gaps and smooth regional series");
    fs::path gap_in, gap_out;
    KeyOptions gap_keys;
    gapfill->add_option("--input", gap_in, "regional CSV")->required();
    gapfill->add_option("--output", gap_out, "regional CSV")->required();
    gap_keys.add(gapfill, {"l_max", "interpolator", "savgol_window", "savgol_order", "smooth", "gp_kernel",
                           "gp_restarts", "gp_max_iterations", "seed"});

    // indices
    auto* indices = app.add_subcommand("indices", "Compute climatology, VCI, VCI3M and NDVI anomaly");
    fs::path idx_in, idx_out;
    KeyOptions idx_keys;
    indices->add_option("--input", idx_in, "regional NDVI CSV (gap-filled)")->required();
    indices->add_option("--output_dir", idx_out, "output directory")->required();
    idx_keys.add(indices, {"degenerate_week"});

    // forecast
    auto* forecast = app.add_subcommand("forecast", "Issue AR, GP and persistence forecasts");
    fs::path fc_in, fc_out, fc_clear;
    std::string fc_issue;
    KeyOptions fc_keys;
    forecast->add_option("--input", fc_in, "regional index CSV")->required();
    forecast->add_option("--output", fc_out, "forecast records CSV")->required();
    forecast->add_option("--issue_date", fc_issue, "single issue date (YYYY-MM-DD); default all after burn-in");
    forecast->add_option("--clear_fraction", fc_clear, "regional clear-pixel fraction CSV");
    fc_keys.add(forecast, concat({"index", "methods", "leads", "gp_restarts", "gp_max_iterations", "gp_history_weeks",
                                  "gp_min_history", "gp_issue_stride", "issue_stride", "burn_in", "seed"},
                                 kArKeys));

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Skill reports from forecast records");
    fs::path ev_in, ev_out, ev_series;
    KeyOptions ev_keys;
    evaluate->add_option("--input", ev_in, "forecast records CSV")->required();
    evaluate->add_option("--output_dir", ev_out, "report directory")->required();
    evaluate->add_option("--series", ev_series, "regional index CSV, enables the coverage table");
    ev_keys.add(evaluate, concat({"leads", "burn_in"}, kArKeys));

    // granger
    auto* granger = app.add_subcommand("granger", "Pairwise Granger RMSE-reduction matrix");
    fs::path gr_in, gr_out;
    std::size_t gr_lead = 1, gr_lags = 3, gr_stride = 1;
    double gr_threshold = 5.0;
    KeyOptions gr_keys;
    granger->add_option("--input", gr_in, "regional index CSV")->required();
    granger->add_option("--output", gr_out, "matrix CSV")->required();
    granger->add_option("--lead", gr_lead, "forecast lead n")->capture_default_str();
    granger->add_option("--source_lags,--source-lags", gr_lags, "lags q of the source region")->capture_default_str();
    granger->add_option("--threshold,--granger-threshold", gr_threshold, "percent RMSE reduction that flags a pair")->capture_default_str();
    granger->add_option("--window_stride,--window-stride", gr_stride, "weeks between training windows")->capture_default_str();
    gr_keys.add(granger, {"index", "ar_order", "ar_train_length", "ar_demean"});

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic observation set with ground truth");
    synth::SynthSpec spec;
    fs::path syn_out;
    std::string syn_start;
    std::vector<std::string> syn_couplings;
    synth_cmd->add_option("--output_dir", syn_out, "output directory")->required();
    synth_cmd->add_option("--regions", spec.regions)->capture_default_str();
    synth_cmd->add_option("--years", spec.years)->capture_default_str();
    synth_cmd->add_option("--pixels", spec.pixels_per_region, "pixels per region")->capture_default_str();
    synth_cmd->add_option("--start", syn_start, "first week (YYYY-MM-DD), default 2000-01-01");
    synth_cmd->add_option("--ndvi_base", spec.ndvi_base)->capture_default_str();
    synth_cmd->add_option("--seasonal_amplitude", spec.seasonal_amplitude)->capture_default_str();
    synth_cmd->add_option("--ar_phi", spec.ar_phi)->capture_default_str();
    synth_cmd->add_option("--anomaly_noise", spec.anomaly_noise_std)->capture_default_str();
    synth_cmd->add_option("--pixel_spread", spec.pixel_spread)->capture_default_str();
    synth_cmd->add_option("--observation_noise", spec.observation_noise_std)->capture_default_str();
    synth_cmd->add_option("--cloud_base", spec.cloud_base)->capture_default_str();
    synth_cmd->add_option("--cloud_seasonal", spec.cloud_seasonal)->capture_default_str();
    synth_cmd->add_option("--pixel_dropout", spec.pixel_dropout)->capture_default_str();
    synth_cmd->add_option("--droughts", spec.droughts_per_region, "drought events per region")->capture_default_str();
    synth_cmd->add_option("--drought_weeks", spec.drought_weeks)->capture_default_str();
    synth_cmd->add_option("--drought_depth", spec.drought_depth)->capture_default_str();
    synth_cmd->add_option("--coupling", syn_couplings, "FROM:TO:B with 1-based region numbers (repeatable)");
    synth_cmd->add_option("--seed", spec.seed)->capture_default_str();

    // run
    auto* run = app.add_subcommand("run", "Full pipeline: ingest, gap-fill, indices, forecast, evaluate");
    fs::path run_config;
    run->add_option("--config", run_config, "key=value config file; flags override file values");
    KeyOptions run_keys;
    run_keys.add(run, config_keys());

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_inputs, ingest_out, ingest_clear, ingest_keys);
        if (*gapfill) return cmd_gapfill(gap_in, gap_out, gap_keys);
        if (*indices) return cmd_indices(idx_in, idx_out, idx_keys);
        if (*forecast) return cmd_forecast(fc_in, fc_out, fc_issue, fc_clear, fc_keys);
        if (*evaluate) return cmd_evaluate(ev_in, ev_out, ev_series, ev_keys);
        if (*granger) return cmd_granger(gr_in, gr_out, gr_lead, gr_lags, gr_threshold, gr_stride, gr_keys);
        if (*synth_cmd) {
            if (!syn_start.empty()) spec.start = parse_date(syn_start);
            for (const auto& c : syn_couplings) spec.couplings.push_back(parse_coupling(c));
            const auto data = synth::generate_synthetic(spec);
            synth::write_synthetic(syn_out, data);
            std::cerr << "wrote " << data.observations.size() << " pixels, " << data.events.size()
                      << " drought events to " << syn_out.string() << '\n';
            return 0;
        }
        if (*run) {
            PipelineConfig cfg;
            if (!run_config.empty()) {
                std::ifstream in(run_config);
                if (!in) throw Error(ErrorCode::Config, "cannot read config file " + run_config.string());
                for (const auto& [k, v] : read_config_text(in)) cfg.set(k, v);
            }
            run_keys.apply(cfg);
            const auto result = run_pipeline(cfg);
            for (const auto& e : result.log) std::cerr << e.line() << '\n';
            if (result.exit_code == 0) {
                std::cerr << "regions=" << result.regions << " records=" << result.records
                          << " cache=" << (result.cache_hit ? "hit" : "miss") << '\n';
            }
            return result.exit_code;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
