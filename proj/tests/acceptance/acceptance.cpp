// One line per acceptance criterion: PASS/FAIL, the measured quantity, the
// runtime and its limit. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vegcast/ar.hpp"
#include "vegcast/evaluate.hpp"
#include "vegcast/gapfill.hpp"
#include "vegcast/gp.hpp"
#include "vegcast/indices.hpp"
#include "vegcast/ingest.hpp"
#include "vegcast/pipeline.hpp"
#include "vegcast/synth.hpp"

using namespace vegcast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "vegcast_acceptance_work" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

eval::ForecastRecord record(double predicted, double truth, std::size_t i) {
    eval::ForecastRecord r;
    r.region_id = "R";
    r.issue_date = parse_date("2001-01-06") + std::chrono::days{7 * static_cast<int>(i)};
    r.predicted = predicted;
    r.truth = truth;
    return r;
}

// --- 1 ----------------------------------------------------------------------

Outcome metric_identities() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_int_distribution<int> size(2, 200);
    double worst = 0.0;
    for (int set = 0; set < 1000; ++set) {
        std::vector<eval::ForecastRecord> recs;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) recs.push_back(record(u(rng), u(rng), static_cast<std::size_t>(i)));
        const auto s = eval::s_metric(recs);
        const auto r2 = eval::r2_score(recs);
        if (!s || !r2) continue;
        worst = std::max(worst, std::abs(*s - 100.0 * std::sqrt(1.0 - *r2)));
    }
    return {worst < 1e-9, "max |S - 100 sqrt(1-R2)| = " + fmt(worst)};
}

// --- 2 ----------------------------------------------------------------------

Outcome interpolation_exactness() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> c(-1.0, 1.0);
    const TimeGrid grid(parse_date("2000-01-01"), 80);
    double worst = 0.0;
    bool lmax_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        const double a = c(rng), b = c(rng) * 0.05, q = c(rng) * 0.001;
        const int degree = trial % 3;
        auto poly = [&](double x) { return a + (degree >= 1 ? b * x : 0.0) + (degree >= 2 ? q * x * x : 0.0); };
        std::vector<std::optional<double>> full(grid.length()), holed(grid.length());
        for (std::size_t i = 0; i < full.size(); ++i) full[i] = poly(static_cast<double>(i));
        holed = full;
        for (std::size_t i = 10; i < 16; ++i) holed[i].reset();  // 6 weeks
        for (std::size_t i = 30; i < 37; ++i) holed[i].reset();  // 7 weeks
        for (std::size_t i = 50; i < 52; ++i) holed[i].reset();
        const auto filled = fill_gaps(WeeklySeries(grid, holed), {}).series;
        for (std::size_t i = 0; i < full.size(); ++i) {
            if (i >= 30 && i < 37) {
                lmax_ok = lmax_ok && !filled.present(i);
                continue;
            }
            if (!filled[i]) {
                lmax_ok = false;
                continue;
            }
            worst = std::max(worst, std::abs(*filled[i] - *full[i]));
        }
        const auto smooth = savitzky_golay(WeeklySeries(grid, full), {});
        for (std::size_t i = 0; i < full.size(); ++i) worst = std::max(worst, std::abs(*smooth[i] - *full[i]));
    }
    return {worst < 1e-9 && lmax_ok,
            "max abs error = " + fmt(worst) + ", 6-week gap filled and 7-week gap kept: " + (lmax_ok ? "yes" : "no")};
}

// --- 3 ----------------------------------------------------------------------

// Gaussian elimination with partial pivoting on the normal equations.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    const std::size_t p = x[0].size();
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) a[i][j] += x[r][i] * x[r][j];
            a[i][p] += x[r][i] * y[r];
        }
    }
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < p; ++i) {
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        }
        std::swap(a[k], a[piv]);
        for (std::size_t i = k + 1; i < p; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j <= p; ++j) a[i][j] -= f * a[k][j];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t k = p; k-- > 0;) {
        double s = a[k][p];
        for (std::size_t j = k + 1; j < p; ++j) s -= a[k][j] * beta[j];
        beta[k] = s / a[k][k];
    }
    return beta;
}

std::vector<double> simulate_ar3(std::size_t n, std::uint64_t seed, double noise, const double (&phi)[3]) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, noise);
    std::vector<double> x(n + 100, 0.0);
    for (std::size_t t = 3; t < x.size(); ++t) x[t] = phi[0] * x[t - 1] + phi[1] * x[t - 2] + phi[2] * x[t - 3] + e(rng);
    return {x.begin() + 100, x.end()};
}

Outcome ar_oracle() {
    ar::ARConfig cfg;
    cfg.order = 3;
    cfg.train_length = 200;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_int_distribution<std::size_t> lead(1, 10);
    double worst = 0.0;
    for (int w = 0; w < 100; ++w) {
        std::vector<double> x(200);
        double level = u(rng);
        for (auto& v : x) v = level = std::clamp(level + (u(rng) - 50.0) * 0.2, 0.0, 100.0);
        cfg.lead = lead(rng);
        const auto model = ar::ar_fit(std::span<const double>(x), cfg);
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        std::vector<std::vector<double>> rows;
        std::vector<double> y;
        for (std::size_t t = 2; t + cfg.lead < x.size(); ++t) {
            rows.push_back({x[t] - mean, x[t - 1] - mean, x[t - 2] - mean});
            y.push_back(x[t + cfg.lead] - mean);
        }
        const auto beta = normal_equations(rows, y);
        for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(beta[i] - model.coefficients[i]));
    }
    const double phi[3] = {0.6, 0.2, -0.15};
    double sums[3] = {0, 0, 0};
    cfg.lead = 1;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto x = simulate_ar3(200, 100 + seed, 0.1, phi);
        const auto model = ar::ar_fit(std::span<const double>(x), cfg);
        for (std::size_t i = 0; i < 3; ++i) sums[i] += model.coefficients[i] / 20.0;
    }
    double recovery = 0.0;
    for (std::size_t i = 0; i < 3; ++i) recovery = std::max(recovery, std::abs(sums[i] - phi[i]));
    return {worst < 1e-8 && recovery < 0.1,
            "max |coef - brute force| = " + fmt(worst) + ", max |mean coef - true| = " + fmt(recovery)};
}

// --- 4 ----------------------------------------------------------------------

Outcome gp_gradients() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> lp(-1.5, 2.5), noise(-4.0, -1.0);
    std::vector<double> t, r;
    std::normal_distribution<double> e(0.0, 0.05);
    for (int i = 0; i < 40; ++i) {
        t.push_back(i * 1.3);
        r.push_back(0.2 * std::sin(i * 1.3 * 2 * std::numbers::pi / 52.0) + e(rng));
    }
    double worst = 0.0;
    std::string worst_kernel;
    for (const char* s : {"LINEAR", "RBF", "PERIODIC", "RQ", "MATERN32", "MATERN52", "RBF+PERIODIC", "RBF*PERIODIC"}) {
        gp::Kernel k = gp::Kernel::parse(s);
        for (int point = 0; point < 50; ++point) {
            std::vector<double> p(k.num_params());
            for (auto& v : p) v = lp(rng);
            if (std::string(s) == "LINEAR") p[0] -= 3.0;
            k.set_log_params(p);
            const double ln = noise(rng);
            const auto lml = gp::log_marginal_likelihood(k, ln, t, r, true);
            std::vector<double> fd(p.size() + 1);
            const double h = 1e-5;
            for (std::size_t i = 0; i <= p.size(); ++i) {
                auto q = p;
                double up, down;
                if (i < p.size()) {
                    q[i] = p[i] + h;
                    k.set_log_params(q);
                    up = gp::log_marginal_likelihood(k, ln, t, r, false).value;
                    q[i] = p[i] - h;
                    k.set_log_params(q);
                    down = gp::log_marginal_likelihood(k, ln, t, r, false).value;
                    k.set_log_params(p);
                } else {
                    up = gp::log_marginal_likelihood(k, ln + h, t, r, false).value;
                    down = gp::log_marginal_likelihood(k, ln - h, t, r, false).value;
                }
                fd[i] = (up - down) / (2 * h);
            }
            double num = 0, den = 0;
            for (std::size_t i = 0; i < fd.size(); ++i) {
                num += (lml.gradient[i] - fd[i]) * (lml.gradient[i] - fd[i]);
                den += fd[i] * fd[i];
            }
            const double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
            if (rel > worst) {
                worst = rel;
                worst_kernel = s;
            }
        }
    }
    return {worst < 1e-4, "max relative gradient error = " + fmt(worst) + " (" + worst_kernel + ")"};
}

// --- 5 ----------------------------------------------------------------------

Outcome kernel_search_reproduction() {
    const auto candidates = gp::all_primitives();
    int wins = 0, raw_wins = 0;
    std::map<std::string, int> tops;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(500 + seed);
        std::normal_distribution<double> e(0.0, 1.0);
        const std::size_t n = 104;
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);
        // Smooth component: a draw from an RBF process.
        gp::Kernel smooth = gp::Kernel::parse("RBF");
        smooth.set_log_params(std::vector<double>{std::log(0.05), std::log(6.0)});
        Eigen::MatrixXd k = gp::gram_matrix(smooth, t);
        k.diagonal().array() += 1e-8;
        const Eigen::MatrixXd l = k.llt().matrixL();
        Eigen::VectorXd z(static_cast<Eigen::Index>(n));
        for (auto& v : z) v = e(rng);
        const Eigen::VectorXd draw = l * z;
        const double phase = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = 0.5 + 0.2 * std::sin(2 * std::numbers::pi * t[i] / 52.0 + phase) + draw(static_cast<Eigen::Index>(i)) +
                   0.01 * e(rng);
        }
        gp::FitOptions opt;
        opt.seed = seed;
        const auto ranked = gp::kernel_search(t, y, candidates, opt);
        const auto top = ranked.front().kernel.structure();
        const auto best_lml = std::max_element(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.log_marginal_likelihood < b.log_marginal_likelihood;
        });
        raw_wins += best_lml->kernel.structure() == "RBF+PERIODIC";
        ++tops[top];
        if (top == "RBF+PERIODIC" || top == "PERIODIC+RBF") ++wins;
    }
    std::string detail = "RBF+PERIODIC top in " + std::to_string(wins) + "/10 seeds;";
    for (const auto& [k, v] : tops) detail += " " + k + "=" + std::to_string(v);
    detail += "; by raw likelihood alone " + std::to_string(raw_wins) + "/10";
    return {wins >= 8, detail};
}

// --- 6 ----------------------------------------------------------------------

synth::SynthSpec benchmark_spec(std::uint64_t seed) {
    synth::SynthSpec spec;
    spec.regions = 10;
    spec.years = 15;
    spec.pixels_per_region = 30;
    spec.cloud_base = 0.05;
    spec.droughts_per_region = 3;
    spec.seed = seed;
    return spec;
}

Outcome skill_vs_persistence() {
    const fs::path dir = scratch("benchmark");
    synth::write_synthetic(dir / "data", synth::generate_synthetic(benchmark_spec(6)));
    PipelineConfig cfg;
    cfg.inputs = {dir / "data" / "observations.csv"};
    cfg.output_dir = dir / "out";
    cfg.style = PipelineStyle::ModisInterp;
    cfg.leads = {2, 4, 6};
    cfg.gp_issue_stride = 4;
    cfg.cache = false;
    cfg.seed = 6;
    const auto result = run_pipeline(cfg);
    if (result.exit_code != 0) {
        return {false, "pipeline exit " + std::to_string(result.exit_code) +
                           (result.log.empty() ? "" : ": " + result.log.back().line())};
    }
    std::ifstream in(cfg.output_dir / "report" / "summary.json");
    const auto summary = nlohmann::json::parse(in);
    auto metric = [&](std::size_t lead, const char* method, const char* key) -> double {
        for (const auto& l : summary["leads"]) {
            if (l["lead"] != lead) continue;
            for (const auto& m : l["methods"]) {
                if (m["method"] == method && m[key].is_number()) return m[key].get<double>();
            }
        }
        return std::nan("");
    };
    const double ar4 = metric(4, "AR", "persistence_ratio_pct");
    const double gp4 = metric(4, "GP", "persistence_ratio_pct");
    const double r2_2 = metric(2, "AR", "r2"), r2_6 = metric(6, "AR", "r2");
    const double gr2_2 = metric(2, "GP", "r2"), gr2_6 = metric(6, "GP", "r2");
    const bool pass = ar4 < 85.0 && gp4 < 100.0 && r2_2 > r2_6 && gr2_2 > gr2_6;
    return {pass, "lead-4 persistence ratio AR " + fmt(ar4) + " GP " + fmt(gp4) + "; R2 lead 2/6 AR " + fmt(r2_2) +
                      "/" + fmt(r2_6) + " GP " + fmt(gr2_2) + "/" + fmt(gr2_6)};
}

// --- 7 ----------------------------------------------------------------------

Outcome roc_sanity() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    const auto grid = eval::default_binarization_grid();
    std::vector<eval::ForecastRecord> perfect;
    for (std::size_t i = 0; i < 2000; ++i) {
        const double v = u(rng);
        perfect.push_back(record(v, v, i));
    }
    const auto roc = eval::roc_curve(perfect, kDroughtAlertThreshold, grid);
    bool operating = false;
    for (const auto& p : roc) {
        if (p.threshold == kDroughtAlertThreshold) operating = p.false_alarm_rate == 0.0 && p.hit_rate == 1.0;
    }
    bool monotone = true;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 r(seed);
        auto shuffled = perfect;
        std::vector<double> preds;
        for (const auto& x : shuffled) preds.push_back(x.predicted);
        std::shuffle(preds.begin(), preds.end(), r);
        for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].predicted = preds[i];
        const auto curve = eval::roc_curve(shuffled, kDroughtAlertThreshold, grid);
        worst = std::max(worst, std::abs(eval::roc_auc(curve) - 0.5));
        for (std::size_t i = 1; i < curve.size(); ++i) {
            monotone = monotone && curve[i].hit_rate >= curve[i - 1].hit_rate &&
                       curve[i].false_alarm_rate >= curve[i - 1].false_alarm_rate;
        }
        for (auto& x : shuffled) x.truth_at_issue = u(r);
        const auto ts = eval::transition_skill(shuffled, kDroughtAlertThreshold, grid);
        std::optional<double> prev_hit;
        for (const auto& p : ts.points) {
            if (p.hit_rate) {
                if (prev_hit) monotone = monotone && *p.hit_rate >= *prev_hit;
                prev_hit = p.hit_rate;
            }
        }
    }
    return {operating && monotone && worst <= 0.05,
            std::string("perfect operating point ") + (operating ? "(0,1)" : "wrong") + ", max |AUC-0.5| = " +
                fmt(worst) + ", monotone " + (monotone ? "yes" : "no")};
}

// --- 8 ----------------------------------------------------------------------

Outcome gap_bookkeeping() {
    synth::SynthSpec spec;
    spec.regions = 4;
    spec.years = 12;
    spec.pixels_per_region = 30;
    spec.cloud_base = 0.012;
    spec.seed = 8;
    const auto data = synth::generate_synthetic(spec);

    ar::ARConfig cfg;
    cfg.lead = 4;
    const std::size_t burn_in = cfg.train_length + 52;
    std::vector<IndexSeries> series;
    std::map<std::string, std::vector<const ObservationSeries*>> by_region;
    for (const auto& o : data.observations) by_region[o.region_id()].push_back(&o);
    for (const auto& [rid, pixels] : by_region) {
        RegionSampleSet set{rid, {}, 25};
        for (const auto* p : pixels) set.pixel_series.push_back(composite_weekly(*p, data.grid));
        const WeeklySeries ndvi = aggregate_region(set);
        const auto vci = compute_vci(ndvi, build_climatology(ndvi), rid).series;
        series.push_back(compute_vci3m(vci, ndvi));
    }
    const auto rows = eval::coverage_report(series, cfg, burn_in);

    double worst = 0.0, blocked = 0.0;
    const std::size_t p = cfg.order, n = cfg.lead, t_len = cfg.train_length;
    for (const auto& row : rows) {
        const auto& cloudy = data.cloudy.at(row.region_id);
        auto present = [&](std::size_t i) { return i >= 11 && !cloudy[i]; };
        std::size_t assessed = 0, ok = 0;
        for (std::size_t t = burn_in; t + n < cloudy.size(); ++t) {
            ++assessed;
            if (!present(t + n)) continue;
            bool good = true;
            for (std::size_t i = 0; i < p; ++i) good = good && present(t - i);
            std::size_t valid = 0;
            for (std::size_t s = t + 1 - t_len + p - 1; s + n <= t; ++s) {
                bool row_ok = present(s + n);
                for (std::size_t i = 0; i < p; ++i) row_ok = row_ok && present(s - i);
                valid += row_ok;
            }
            good = good && static_cast<double>(valid) >= cfg.min_valid_fraction * static_cast<double>(t_len - p - n);
            ok += good;
        }
        const double expected = 100.0 * static_cast<double>(ok) / static_cast<double>(assessed);
        worst = std::max(worst, std::abs(expected - row.pct));
        blocked += (100.0 - row.pct) / static_cast<double>(rows.size());
    }
    return {rows.size() == 4 && worst <= 1.0,
            "max |coverage - sidecar| = " + fmt(worst) + " pp, mean blocked = " + fmt(blocked, 3) + "%"};
}

// --- 9 ----------------------------------------------------------------------

Outcome granger_detection() {
    int coupled_found = 0, clean = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        synth::SynthSpec spec;
        spec.regions = 5;
        spec.years = 10;
        spec.pixels_per_region = 1;
        spec.cloud_base = 0.0;
        spec.couplings.push_back({1, 3, 0.5});
        spec.seed = 900 + seed;
        const auto data = synth::generate_synthetic(spec);
        std::vector<IndexSeries> anomalies;
        for (const auto& [rid, ndvi] : data.truth) anomalies.push_back(compute_ndvi_anomaly(ndvi, build_climatology(ndvi), rid));
        ar::GrangerConfig cfg;
        cfg.window_stride = 4;
        const auto m = ar::granger_matrix(anomalies, cfg);
        bool found = false, spurious = false;
        for (const auto& e : m.entries) {
            if (e.from == "R02" && e.to == "R04") found = true;
            else spurious = true;
        }
        coupled_found += found;
        clean += !spurious;
    }
    return {coupled_found >= 9 && clean >= 9, "coupled pair flagged in " + std::to_string(coupled_found) +
                                                  "/10 seeds, no spurious entries in " + std::to_string(clean) + "/10"};
}

// --- 10 ---------------------------------------------------------------------

Outcome no_leakage() {
    synth::SynthSpec spec;
    spec.regions = 2;
    spec.years = 8;
    spec.pixels_per_region = 26;
    spec.droughts_per_region = 1;
    spec.seed = 10;
    const auto data = synth::generate_synthetic(spec);
    PipelineConfig cfg;
    cfg.leads = {1, 4, 8};
    cfg.gp.fit.restarts = 2;
    cfg.seed = 10;
    const auto pre = preprocess(data.observations, cfg);

    std::size_t compared = 0, changed = 0;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    const auto& grid = pre.regions.front().vci3m.series().grid();
    for (const auto& region : pre.regions) {
        for (std::size_t issue : {260u, 300u, 350u, 400u}) {
            const auto& s = region.vci3m.series();
            std::vector<std::optional<double>> v = s.values();
            for (std::size_t i = issue + 1; i < v.size(); ++i) {
                if (v[i]) v[i] = u(rng);
            }
            const IndexSeries perturbed(WeeklySeries(grid, v), IndexKind::Vci3m, region.region_id);
            const auto a = forecast_series(region.vci3m, nullptr, cfg, nullptr, issue);
            const auto b = forecast_series(perturbed, nullptr, cfg, nullptr, issue);
            std::map<std::pair<std::size_t, int>, double> pa;
            for (const auto& r : a) pa[{r.lead, static_cast<int>(r.method)}] = r.predicted;
            for (const auto& r : b) {
                const auto it = pa.find({r.lead, static_cast<int>(r.method)});
                if (it == pa.end()) continue;
                ++compared;
                changed += it->second != r.predicted;
            }
        }
    }

    // Forecast-mode GP gap-filling: samples after the cutoff must not matter.
    std::size_t gap_compared = 0, gap_changed = 0;
    gp::GapfillOptions opt;
    opt.mode = gp::GapfillMode::Forecast;
    opt.fit.restarts = 2;
    const TimeGrid short_grid(data.grid.start(), 150);
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& obs = data.observations[k];
        opt.cutoff = short_grid.date(100);
        opt.fit.seed = k;
        std::vector<Sample> original, perturbed;
        for (const auto& s : obs.samples()) {
            if (s.date > short_grid.date(short_grid.length() - 1)) break;
            original.push_back(s);
            auto q = s;
            if (s.date > *opt.cutoff) q.value = std::uniform_real_distribution<double>(-0.5, 0.9)(rng);
            perturbed.push_back(q);
        }
        const auto fa = gp::gp_gapfill(ObservationSeries(obs.pixel_id(), obs.region_id(), original), short_grid, opt);
        const auto fb = gp::gp_gapfill(ObservationSeries(obs.pixel_id(), obs.region_id(), perturbed), short_grid, opt);
        if (!fa.series || !fb.series) continue;
        for (std::size_t i = 0; i < short_grid.length(); ++i) {
            ++gap_compared;
            gap_changed += (*fa.series)[i] != (*fb.series)[i];
        }
    }
    return {compared > 0 && changed == 0 && gap_compared > 0 && gap_changed == 0,
            std::to_string(changed) + "/" + std::to_string(compared) + " forecasts changed, " +
                std::to_string(gap_changed) + "/" + std::to_string(gap_compared) + " forecast-mode fills changed"};
}

// --- 11 ---------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root).generic_string();
        if (rel.rfind("cache/", 0) == 0) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files[rel] = ss.str();
    }
    return files;
}

Outcome determinism() {
#ifdef VEGCAST_CLI
    const fs::path dir = scratch("determinism");
    synth::SynthSpec spec = benchmark_spec(11);
    spec.regions = 3;
    spec.years = 8;
    synth::write_synthetic(dir / "data", synth::generate_synthetic(spec));
    {
        std::ofstream cfg(dir / "run.cfg");
        cfg << "input=" << (dir / "data" / "observations.csv").string() << "\n"
            << "output_dir=" << (dir / "out").string() << "\n"
            << "leads=2,4,6\ngp_issue_stride=8\nseed=11\ncache=false\n";
    }
    const std::string cmd = std::string("\"") + VEGCAST_CLI + "\" run --config \"" + (dir / "run.cfg").string() +
                            "\" > \"" + (dir / "stdout.txt").string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "first run failed"};
    const auto first = snapshot(dir / "out");
    fs::remove_all(dir / "out");
    if (std::system(cmd.c_str()) != 0) return {false, "second run failed"};
    const auto second = snapshot(dir / "out");
    std::size_t differing = 0;
    for (const auto& [name, body] : first) {
        const auto it = second.find(name);
        differing += it == second.end() || it->second != body;
    }
    differing += second.size() > first.size() ? second.size() - first.size() : 0;
    return {differing == 0 && first.size() > 5,
            std::to_string(first.size()) + " files compared, " + std::to_string(differing) + " differ"};
#else
    return {false, "CLI binary path not configured"};
#endif
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "metric identities", 1.0, metric_identities},
        {2, "interpolation exactness", 1.0, interpolation_exactness},
        {3, "AR oracle equivalence", 10.0, ar_oracle},
        {4, "GP gradient check", 30.0, gp_gradients},
        {5, "kernel-search reproduction", 300.0, kernel_search_reproduction},
        {6, "skill vs persistence", 600.0, skill_vs_persistence},
        {7, "ROC sanity", 10.0, roc_sanity},
        {8, "gap bookkeeping", 60.0, gap_bookkeeping},
        {9, "Granger detection", 60.0, granger_detection},
        {10, "no-leakage audit", 60.0, no_leakage},
        {11, "end-to-end determinism", 0.0, determinism},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_seconds <= 0.0 || secs < c.limit_seconds;
        const bool pass = out.pass && in_time;
        failures += !pass;
        std::printf("%s criterion %d (%s): %s; %.2f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                    secs, c.limit_seconds > 0 ? (" (limit " + fmt(c.limit_seconds) + " s)").c_str() : "");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
