#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "vegcast/ar.hpp"
#include "vegcast/evaluate.hpp"
#include "vegcast/gapfill.hpp"
#include "vegcast/gp.hpp"
#include "vegcast/indices.hpp"
#include "vegcast/pipeline.hpp"
#include "vegcast/synth.hpp"

namespace py = pybind11;
using namespace vegcast;

namespace {

using Values = std::vector<std::optional<double>>;

WeeklySeries to_series(const Values& values, const std::string& start) {
    if (values.empty()) throw Error(ErrorCode::InvalidInput, "series is empty");
    return WeeklySeries(TimeGrid(parse_date(start), values.size()), values);
}

std::vector<eval::ForecastRecord> to_records(const std::vector<double>& predicted, const std::vector<double>& truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::InvalidInput, "predicted and truth must have the same length");
    }
    std::vector<eval::ForecastRecord> out(predicted.size());
    const Date base = parse_date("2000-01-01");
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].region_id = "r";
        out[i].issue_date = base + std::chrono::days{7 * static_cast<int>(i)};
        out[i].predicted = predicted[i];
        out[i].truth = truth[i];
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_vegcast, m) {
    m.doc() = "Bindings for the vegcast C++ library";

    static py::exception<Error> error(m, "VegcastError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            error((std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    m.def(
        "generate_synthetic",
        [](const std::string& output_dir, std::size_t regions, double years, std::size_t pixels,
           std::size_t droughts, double cloud_base, std::vector<std::tuple<std::size_t, std::size_t, double>> couplings,
           std::uint64_t seed) {
            synth::SynthSpec spec;
            spec.regions = regions;
            spec.years = years;
            spec.pixels_per_region = pixels;
            spec.droughts_per_region = droughts;
            spec.cloud_base = cloud_base;
            for (const auto& [from, to, b] : couplings) spec.couplings.push_back({from, to, b});
            spec.seed = seed;
            const auto data = synth::generate_synthetic(spec);
            synth::write_synthetic(output_dir, data);
            return data.region_ids;
        },
        py::arg("output_dir"), py::arg("regions") = 3, py::arg("years") = 15.0, py::arg("pixels") = 30,
        py::arg("droughts") = 0, py::arg("cloud_base") = 0.05,
        py::arg("couplings") = std::vector<std::tuple<std::size_t, std::size_t, double>>{}, py::arg("seed") = 0,
        "Write a synthetic observation set (observations.csv plus truth sidecars); returns the region ids. "
        "Couplings are (from, to, b) with 0-based region indices.");

    m.def(
        "run_pipeline",
        [](const std::map<std::string, py::object>& config) {
            PipelineConfig cfg;
            for (const auto& [key, value] : config) {
                std::string text;
                if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
                    for (const auto& item : value) {
                        if (!text.empty()) text += ',';
                        text += py::str(item).cast<std::string>();
                    }
                } else if (py::isinstance<py::bool_>(value)) {
                    text = value.cast<bool>() ? "true" : "false";
                } else {
                    text = py::str(value).cast<std::string>();
                }
                cfg.set(key, text);
            }
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_pipeline(cfg);
            }
            py::dict out;
            out["exit_code"] = r.exit_code;
            out["regions"] = r.regions;
            out["records"] = r.records;
            out["cache_hit"] = r.cache_hit;
            std::vector<std::string> lines;
            for (const auto& e : r.log) lines.push_back(e.line());
            out["log"] = lines;
            return out;
        },
        py::arg("config"),
        "Run the full pipeline from a dict of config keys (the same keys as the CLI and config files).");

    m.def(
        "r2_score", [](const std::vector<double>& p, const std::vector<double>& t) { return eval::r2_score(to_records(p, t)); },
        py::arg("predicted"), py::arg("truth"));
    m.def(
        "s_metric", [](const std::vector<double>& p, const std::vector<double>& t) { return eval::s_metric(to_records(p, t)); },
        py::arg("predicted"), py::arg("truth"));
    m.def(
        "rmse", [](const std::vector<double>& p, const std::vector<double>& t) { return eval::rmse(to_records(p, t)); },
        py::arg("predicted"), py::arg("truth"));
    m.def(
        "roc_auc",
        [](const std::vector<double>& p, const std::vector<double>& t, double threshold) {
            const auto grid = eval::default_binarization_grid(threshold);
            return eval::roc_auc(eval::roc_curve(to_records(p, t), threshold, grid));
        },
        py::arg("predicted"), py::arg("truth"), py::arg("threshold") = kDroughtAlertThreshold);

    m.def(
        "categorize", [](double v) { return std::string(to_string(categorize(v))); }, py::arg("value"));

    m.def(
        "fill_gaps",
        [](const Values& values, std::size_t l_max, const std::string& interpolator, const std::string& start) {
            GapFillConfig cfg;
            cfg.l_max = l_max;
            cfg.interpolator = parse_interpolator(interpolator);
            cfg.validate();
            return fill_gaps(to_series(values, start), cfg).series.values();
        },
        py::arg("values"), py::arg("l_max") = 6, py::arg("interpolator") = "QUADRATIC",
        py::arg("start") = "2000-01-01");

    m.def(
        "savitzky_golay",
        [](const Values& values, std::size_t window, std::size_t order, const std::string& start) {
            GapFillConfig cfg;
            cfg.savgol_window = window;
            cfg.savgol_order = order;
            cfg.validate();
            return savitzky_golay(to_series(values, start), cfg).values();
        },
        py::arg("values"), py::arg("window") = 7, py::arg("order") = 2, py::arg("start") = "2000-01-01");

    m.def(
        "compute_indices",
        [](const Values& ndvi, const std::string& start, bool midpoint) {
            const WeeklySeries s = to_series(ndvi, start);
            const auto clim = build_climatology(s);
            const auto vci = compute_vci(s, clim, "r",
                                         midpoint ? DegenerateWeekPolicy::Midpoint : DegenerateWeekPolicy::Error);
            py::dict out;
            out["vci"] = vci.series.series().values();
            out["vci3m"] = compute_vci3m(vci.series, s).series().values();
            out["ndvi_anomaly"] = compute_ndvi_anomaly(s, clim, "r").series().values();
            out["clipped"] = vci.clipped;
            return out;
        },
        py::arg("ndvi"), py::arg("start") = "2000-01-01", py::arg("degenerate_midpoint") = false,
        "Weekly NDVI (None for gaps) starting on `start` -> dict of VCI, VCI3M and NDVI anomaly.");

    m.def(
        "ar_forecast",
        [](const Values& values, std::size_t issue_index, std::size_t lead, std::size_t order, std::size_t train_length,
           bool demean, const std::string& kind) -> py::object {
            ar::ARConfig cfg;
            cfg.order = order;
            cfg.lead = lead;
            cfg.train_length = train_length;
            cfg.demean = demean;
            const WeeklySeries s = to_series(values, "2000-01-01");
            if (issue_index >= s.size()) throw Error(ErrorCode::InvalidInput, "issue_index beyond the series");
            const IndexSeries series(s, parse_index_kind(kind), "r");
            const auto f = ar::ar_forecast(series, s.grid().date(issue_index), cfg);
            if (f.value) return py::float_(*f.value);
            return py::str(ar::to_string(f.reason));
        },
        py::arg("values"), py::arg("issue_index"), py::arg("lead"), py::arg("order") = 3, py::arg("train_length") = 200,
        py::arg("demean") = true, py::arg("kind") = "VCI3M",
        "Direct n-step AR forecast; returns the value, or the reason code string when no forecast is possible.");

    m.def(
        "gp_forecast",
        [](const Values& values, std::size_t issue_index, const std::vector<std::size_t>& leads, std::uint64_t seed,
           std::size_t history_weeks, const std::string& kind) {
            gp::GpForecastOptions opt;
            opt.fit.seed = seed;
            opt.history_weeks = history_weeks;
            const WeeklySeries s = to_series(values, "2000-01-01");
            if (issue_index >= s.size()) throw Error(ErrorCode::InvalidInput, "issue_index beyond the series");
            const IndexSeries series(s, parse_index_kind(kind), "r");
            std::vector<std::optional<std::pair<double, double>>> out;
            std::vector<gp::GpForecast> fc;
            {
                py::gil_scoped_release release;
                fc = gp::gp_forecast_leads(series, s.grid().date(issue_index), leads, opt);
            }
            for (const auto& f : fc) {
                if (f.value) out.emplace_back(std::make_pair(f.value->mean, f.value->std));
                else out.emplace_back(std::nullopt);
            }
            return out;
        },
        py::arg("values"), py::arg("issue_index"), py::arg("leads"), py::arg("seed") = 0,
        py::arg("history_weeks") = 104, py::arg("kind") = "VCI3M",
        "RBF GP forecast; one (mean, std) tuple per lead, None where the history is insufficient.");
}
