#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vegcast/gp.hpp"
#include "vegcast/types.hpp"

namespace vegcast {

enum class Interpolator { Quadratic, Linear, Cubic, LastValue, MeanValue, Gp };

const char* to_string(Interpolator m);
Interpolator parse_interpolator(std::string_view text);

struct GapFillConfig {
    std::size_t l_max = 6;
    Interpolator interpolator = Interpolator::Quadratic;
    std::size_t savgol_window = 7;
    std::size_t savgol_order = 2;
    /// Kernel and fit settings for the GP interpolator.
    std::string gp_kernel = "RBF+PERIODIC";
    gp::FitOptions gp_fit;

    /// Throws Error(Config) unless the window is odd and exceeds the order and l_max >= 1.
    void validate() const;
};

struct GapFillResult {
    WeeklySeries series;
    /// One entry per gap run that could not be filled for lack of support.
    std::vector<std::string> warnings;
};

/// Fills internal gap runs of length <= l_max; longer runs and leading or
/// trailing gaps stay empty. Present values are never modified.
///
/// QUADRATIC fits one least-squares quadratic per run to the two nearest
/// present points on each side, falling back to linear interpolation between
/// the bracketing points when fewer than four support points exist. CUBIC
/// interpolates the same four points exactly.
GapFillResult fill_gaps(const WeeklySeries& series, const GapFillConfig& cfg);

/// Savitzky-Golay smoothing inside each maximal run of present values.
/// Runs shorter than the window pass through unchanged; points within half a
/// window of a run edge use a fit to the truncated window.
WeeklySeries savitzky_golay(const WeeklySeries& series, const GapFillConfig& cfg);

/// Least-squares polynomial through (x, y), evaluated at `at`. Abscissae are
/// shifted to `at` before fitting.
double polyfit_eval(std::span<const double> x, std::span<const double> y, std::size_t order, double at);

struct InterpolatorScore {
    Interpolator method;
    /// Pooled R^2 of filled vs held-out values; absent when the held-out
    /// truths have zero variance.
    std::optional<double> r2;
    std::size_t scored = 0;    // held-out values the method filled
    std::size_t unfilled = 0;  // held-out values it could not fill
};

/// Holds out `drop_count` present values per series (never two adjacent, each
/// with present neighbours), refills them with every method and scores the
/// fills against the held-out truths. Deterministic for a given seed.
std::vector<InterpolatorScore> compare_interpolators(std::span<const WeeklySeries> series_set,
                                                     std::size_t drop_count, std::uint64_t seed,
                                                     std::span<const Interpolator> methods,
                                                     const GapFillConfig& cfg = {});

}  // namespace vegcast
