#include "vegcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <tuple>

namespace vegcast::synth {

void SynthSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::Config, what);
    };
    require(regions >= 1, "regions must be at least 1");
    require(years > 0.0, "years must be positive");
    require(pixels_per_region >= 1, "pixels_per_region must be at least 1");
    require(ar_phi > -1.0 && ar_phi < 1.0, "ar_phi must lie in (-1, 1)");
    require(anomaly_noise_std >= 0.0 && pixel_spread >= 0.0 && observation_noise_std >= 0.0,
            "noise levels must be non-negative");
    require(cloud_base >= 0.0 && cloud_seasonal >= 0.0 && cloud_base + cloud_seasonal <= 1.0,
            "cloud probabilities must lie in [0, 1]");
    require(pixel_dropout >= 0.0 && pixel_dropout <= 1.0, "pixel_dropout must lie in [0, 1]");
    require(drought_depth >= 0.0 && drought_depth < 1.0, "drought_depth must lie in [0, 1)");
    for (const auto& c : couplings) {
        require(c.from < regions && c.to < regions && c.from != c.to, "coupling names an invalid region pair");
    }
}

namespace {

std::string region_name(std::size_t r) {
    std::string s = std::to_string(r + 1);
    return "R" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

std::string pixel_name(const std::string& region, std::size_t p) {
    std::string s = std::to_string(p + 1);
    return region + "_P" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

double day_of_year_phase(Date d) {
    const std::chrono::year_month_day ymd{d};
    const Date jan1{ymd.year() / 1 / 1};
    return 2.0 * std::numbers::pi * static_cast<double>((d - jan1).count()) / 365.25;
}

}  // namespace

SyntheticData generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const auto weeks = static_cast<std::size_t>(std::llround(spec.years * 365.25 / 7.0));
    SyntheticData out;
    out.grid = TimeGrid(spec.start, weeks);
    out.couplings = spec.couplings;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const std::size_t nr = spec.regions;
    for (std::size_t r = 0; r < nr; ++r) out.region_ids.push_back(region_name(r));

    // regional anomalies, coupled one week apart
    std::vector<std::vector<double>> anomaly(nr, std::vector<double>(weeks, 0.0));
    const double stationary = spec.anomaly_noise_std / std::sqrt(1.0 - spec.ar_phi * spec.ar_phi);
    for (std::size_t r = 0; r < nr; ++r) anomaly[r][0] = stationary * normal(rng);
    for (std::size_t t = 1; t < weeks; ++t) {
        for (std::size_t r = 0; r < nr; ++r) {
            anomaly[r][t] = spec.ar_phi * anomaly[r][t - 1] + spec.anomaly_noise_std * normal(rng);
        }
        for (const auto& c : spec.couplings) anomaly[c.to][t] += c.b * anomaly[c.from][t - 1];
    }

    // drought events: non-overlapping, after the first two years
    std::vector<std::vector<bool>> in_drought(nr, std::vector<bool>(weeks, false));
    const std::size_t earliest = std::min<std::size_t>(104, weeks);
    for (std::size_t r = 0; r < nr; ++r) {
        std::size_t placed = 0;
        for (std::size_t attempt = 0; placed < spec.droughts_per_region && attempt < 1000; ++attempt) {
            if (weeks < earliest + spec.drought_weeks + 1) break;
            const auto span = weeks - earliest - spec.drought_weeks;
            const std::size_t s = earliest + static_cast<std::size_t>(uniform(rng) * static_cast<double>(span));
            const std::size_t lo = s >= 12 ? s - 12 : 0;
            const std::size_t hi = std::min(weeks, s + spec.drought_weeks + 12);
            if (std::any_of(in_drought[r].begin() + static_cast<long>(lo), in_drought[r].begin() + static_cast<long>(hi),
                            [](bool b) { return b; })) {
                continue;
            }
            for (std::size_t t = s; t < s + spec.drought_weeks; ++t) in_drought[r][t] = true;
            out.events.push_back({out.region_ids[r], out.grid.date(s), out.grid.date(s + spec.drought_weeks - 1)});
            ++placed;
        }
    }
    std::sort(out.events.begin(), out.events.end(), [](const DroughtEvent& a, const DroughtEvent& b) {
        return std::tie(a.region_id, a.start) < std::tie(b.region_id, b.start);
    });

    for (std::size_t r = 0; r < nr; ++r) {
        const std::string& rid = out.region_ids[r];
        std::vector<double> truth(weeks);
        for (std::size_t t = 0; t < weeks; ++t) {
            const double phase = day_of_year_phase(out.grid.date(t));
            double v = spec.ndvi_base + spec.seasonal_amplitude * std::sin(phase) + anomaly[r][t];
            if (in_drought[r][t]) v *= 1.0 - spec.drought_depth;
            truth[t] = std::clamp(v, -0.95, 0.95);
        }

        std::vector<bool> cloudy(weeks);
        for (std::size_t t = 0; t < weeks; ++t) {
            const double phase = day_of_year_phase(out.grid.date(t));
            const double p = spec.cloud_base + spec.cloud_seasonal * 0.5 * (1.0 + std::cos(phase));
            cloudy[t] = uniform(rng) < p;
        }

        std::vector<double> offsets(spec.pixels_per_region);
        for (auto& o : offsets) o = spec.pixel_spread * normal(rng);
        double mean_offset = 0.0;
        for (double o : offsets) mean_offset += o;
        mean_offset /= static_cast<double>(offsets.size());
        for (auto& o : offsets) o -= mean_offset;

        std::vector<std::optional<double>> truth_values(weeks);
        for (std::size_t t = 0; t < weeks; ++t) {
            double sum = 0.0;
            for (double o : offsets) sum += std::clamp(truth[t] + o, -1.0, 1.0);
            truth_values[t] = sum / static_cast<double>(offsets.size());
        }
        out.truth.emplace(rid, WeeklySeries(out.grid, std::move(truth_values)));

        for (std::size_t p = 0; p < spec.pixels_per_region; ++p) {
            std::vector<Sample> samples;
            samples.reserve(weeks);
            for (std::size_t t = 0; t < weeks; ++t) {
                const double noise = spec.observation_noise_std * normal(rng);
                const bool dropped = uniform(rng) < spec.pixel_dropout;
                Sample s;
                s.date = out.grid.date(t);
                if (cloudy[t] || dropped) {
                    s.quality = Quality::Bad;
                    s.value = std::clamp(0.05 + 0.5 * noise, -1.0, 1.0);
                } else {
                    s.value = std::clamp(truth[t] + offsets[p] + noise, -1.0, 1.0);
                }
                samples.push_back(s);
            }
            out.observations.emplace_back(pixel_name(rid, p), rid, std::move(samples));
        }
        out.cloudy.emplace(rid, std::move(cloudy));
    }
    return out;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("observations.csv");
        f << "pixel_id,region_id,date,ndvi,quality\n";
        for (const auto& obs : data.observations) {
            for (const auto& s : obs.samples()) {
                f << obs.pixel_id() << ',' << obs.region_id() << ',' << format_date(s.date) << ','
                  << format_double(s.value) << ',' << (s.quality == Quality::Good ? "good" : "bad") << '\n';
            }
        }
    }
    {
        auto f = open("truth.csv");
        write_regional_csv(f, data.truth);
    }
    {
        auto f = open("clouds.csv");
        f << "region_id,date\n";
        for (const auto& [rid, mask] : data.cloudy) {
            for (std::size_t t = 0; t < mask.size(); ++t) {
                if (mask[t]) f << rid << ',' << format_date(data.grid.date(t)) << '\n';
            }
        }
    }
    {
        auto f = open("events.csv");
        f << "region_id,start,end\n";
        for (const auto& e : data.events) f << e.region_id << ',' << format_date(e.start) << ',' << format_date(e.end) << '\n';
    }
    {
        auto f = open("coupling.csv");
        f << "from,to,b\n";
        for (const auto& c : data.couplings) {
            f << data.region_ids.at(c.from) << ',' << data.region_ids.at(c.to) << ',' << format_double(c.b) << '\n';
        }
    }
}

}  // namespace vegcast::synth
