#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vegcast/ingest.hpp"
#include "vegcast/types.hpp"

namespace vegcast::synth {

/// Source anomaly drives target anomaly one week later: a_to(t+1) += b * a_from(t).
struct Coupling {
    std::size_t from = 0;
    std::size_t to = 0;
    double b = 0.0;
};

struct SynthSpec {
    std::size_t regions = 3;
    double years = 15.0;
    std::size_t pixels_per_region = 30;
    Date start = Date{std::chrono::year{2000} / 1 / 1};  // a Saturday

    double ndvi_base = 0.5;
    double seasonal_amplitude = 0.2;
    /// Weekly AR(1) coefficient of the regional NDVI anomaly.
    double ar_phi = 0.9;
    double anomaly_noise_std = 0.02;
    /// Spread of fixed per-pixel offsets around the regional value.
    double pixel_spread = 0.02;
    double observation_noise_std = 0.01;

    /// Region-wide cloud probability: base + seasonal * (1 + cos(2*pi*doy/365.25)) / 2.
    double cloud_base = 0.05;
    double cloud_seasonal = 0.0;
    /// Independent per-pixel bad-quality probability on clear weeks.
    double pixel_dropout = 0.0;

    std::vector<Coupling> couplings;

    std::size_t droughts_per_region = 0;
    std::size_t drought_weeks = 20;
    /// NDVI is multiplied by (1 - depth) during an event.
    double drought_depth = 0.3;

    std::uint64_t seed = 0;

    /// Throws Error(Config) on out-of-range parameters.
    void validate() const;
};

struct DroughtEvent {
    std::string region_id;
    Date start;
    Date end;  // inclusive
};

struct SyntheticData {
    TimeGrid grid{Date{}, 1};
    std::vector<std::string> region_ids;
    std::vector<ObservationSeries> observations;
    /// Noise-free regional NDVI (mean of the true pixel values).
    RegionalSeries truth;
    /// Per region, true where the whole region was cloud covered.
    std::map<std::string, std::vector<bool>> cloudy;
    std::vector<DroughtEvent> events;
    std::vector<Coupling> couplings;
};

SyntheticData generate_synthetic(const SynthSpec& spec);

/// Writes observations.csv (ingest format), truth.csv (regional format),
/// clouds.csv, events.csv and coupling.csv into `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data);

}  // namespace vegcast::synth
