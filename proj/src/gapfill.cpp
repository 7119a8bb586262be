#include "vegcast/gapfill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/QR>

namespace vegcast {

const char* to_string(Interpolator m) {
    switch (m) {
        case Interpolator::Quadratic: return "QUADRATIC";
        case Interpolator::Linear: return "LINEAR";
        case Interpolator::Cubic: return "CUBIC";
        case Interpolator::LastValue: return "LAST_VALUE";
        case Interpolator::MeanValue: return "MEAN_VALUE";
        case Interpolator::Gp: return "GP";
    }
    return "UNKNOWN";
}

Interpolator parse_interpolator(std::string_view text) {
    for (auto m : {Interpolator::Quadratic, Interpolator::Linear, Interpolator::Cubic, Interpolator::LastValue,
                   Interpolator::MeanValue, Interpolator::Gp}) {
        if (text == to_string(m)) return m;
    }
    throw Error(ErrorCode::Config, "unknown interpolator '" + std::string(text) + "'");
}

void GapFillConfig::validate() const {
    if (l_max < 1) throw Error(ErrorCode::Config, "l_max must be at least 1");
    if (savgol_window % 2 == 0) throw Error(ErrorCode::Config, "savgol_window must be odd");
    if (savgol_window <= savgol_order) throw Error(ErrorCode::Config, "savgol_window must exceed savgol_order");
}

double polyfit_eval(std::span<const double> x, std::span<const double> y, std::size_t order, double at) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto cols = static_cast<Eigen::Index>(order + 1);
    Eigen::MatrixXd a(n, cols);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = x[i] - at;
        double p = 1.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            a(i, j) = p;
            p *= dx;
        }
        b(i) = y[i];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    return c(0);
}

namespace {

struct Support {
    std::vector<double> x;
    std::vector<double> y;
};

/// Up to `per_side` nearest present slots on each side of [begin, end).
Support nearest_support(const WeeklySeries& s, std::size_t begin, std::size_t end, std::size_t per_side,
                        std::size_t& left_count, std::size_t& right_count) {
    Support sup;
    left_count = right_count = 0;
    for (std::size_t i = begin; i-- > 0 && left_count < per_side;) {
        if (s[i]) {
            sup.x.insert(sup.x.begin(), static_cast<double>(i));
            sup.y.insert(sup.y.begin(), *s[i]);
            ++left_count;
        }
    }
    for (std::size_t i = end; i < s.size() && right_count < per_side; ++i) {
        if (s[i]) {
            sup.x.push_back(static_cast<double>(i));
            sup.y.push_back(*s[i]);
            ++right_count;
        }
    }
    return sup;
}

double linear_between(double x0, double y0, double x1, double y1, double at) {
    return y0 + (y1 - y0) * (at - x0) / (x1 - x0);
}

double lagrange(std::span<const double> x, std::span<const double> y, double at) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j != i) w *= (at - x[j]) / (x[i] - x[j]);
        }
        sum += w * y[i];
    }
    return sum;
}

}  // namespace

GapFillResult fill_gaps(const WeeklySeries& series, const GapFillConfig& cfg) {
    cfg.validate();
    std::vector<std::optional<double>> out = series.values();
    std::vector<std::string> warnings;
    const std::size_t n = series.size();

    double present_mean = 0.0;
    const std::size_t present = series.present_count();
    for (const auto& v : series.values()) {
        if (v) present_mean += *v;
    }
    if (present > 0) present_mean /= static_cast<double>(present);

    std::optional<gp::GPModel> gp_model;
    bool gp_tried = false;

    auto warn = [&](std::size_t begin, std::size_t end, const std::string& why) {
        warnings.push_back("gap " + format_date(series.grid().date(begin)) + ".." +
                           format_date(series.grid().date(end - 1)) + " left unfilled: " + why);
    };

    std::size_t i = 0;
    while (i < n) {
        if (series[i]) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        while (i < n && !series[i]) ++i;
        const std::size_t end = i;
        if (begin == 0 || end == n) continue;  // leading or trailing
        if (end - begin > cfg.l_max) continue;

        std::size_t nl = 0, nr = 0;
        switch (cfg.interpolator) {
            case Interpolator::Quadratic: {
                const Support sup = nearest_support(series, begin, end, 2, nl, nr);
                if (nl + nr >= 4) {
                    for (std::size_t k = begin; k < end; ++k) {
                        out[k] = polyfit_eval(sup.x, sup.y, 2, static_cast<double>(k));
                    }
                } else {
                    const double x0 = sup.x[nl - 1], y0 = sup.y[nl - 1];
                    const double x1 = sup.x[nl], y1 = sup.y[nl];
                    for (std::size_t k = begin; k < end; ++k) {
                        out[k] = linear_between(x0, y0, x1, y1, static_cast<double>(k));
                    }
                }
                break;
            }
            case Interpolator::Linear: {
                const double y0 = *series[begin - 1], y1 = *series[end];
                for (std::size_t k = begin; k < end; ++k) {
                    out[k] = linear_between(static_cast<double>(begin - 1), y0, static_cast<double>(end), y1,
                                            static_cast<double>(k));
                }
                break;
            }
            case Interpolator::Cubic: {
                const Support sup = nearest_support(series, begin, end, 2, nl, nr);
                if (nl + nr < 4) {
                    warn(begin, end, "cubic needs two present points on each side");
                    break;
                }
                for (std::size_t k = begin; k < end; ++k) out[k] = lagrange(sup.x, sup.y, static_cast<double>(k));
                break;
            }
            case Interpolator::LastValue:
                for (std::size_t k = begin; k < end; ++k) out[k] = *series[begin - 1];
                break;
            case Interpolator::MeanValue:
                for (std::size_t k = begin; k < end; ++k) out[k] = present_mean;
                break;
            case Interpolator::Gp: {
                if (!gp_tried) {
                    gp_tried = true;
                    std::vector<double> t, y;
                    for (std::size_t k = 0; k < n; ++k) {
                        if (series[k]) {
                            t.push_back(static_cast<double>(k));
                            y.push_back(*series[k]);
                        }
                    }
                    try {
                        gp_model.emplace(gp::gp_fit(t, y, gp::Kernel::parse(cfg.gp_kernel), cfg.gp_fit));
                    } catch (const Error& e) {
                        warnings.push_back(std::string("GP interpolator unavailable: ") + e.what());
                    }
                }
                if (!gp_model) {
                    warn(begin, end, "no GP model");
                    break;
                }
                std::vector<double> q;
                for (std::size_t k = begin; k < end; ++k) q.push_back(static_cast<double>(k));
                const auto pred = gp_model->predict(q);
                for (std::size_t k = begin; k < end; ++k) out[k] = pred[k - begin].mean;
                break;
            }
        }
    }
    return {WeeklySeries(series.grid(), std::move(out)), std::move(warnings)};
}

WeeklySeries savitzky_golay(const WeeklySeries& series, const GapFillConfig& cfg) {
    cfg.validate();
    const std::size_t n = series.size();
    const std::size_t half = cfg.savgol_window / 2;
    std::vector<std::optional<double>> out = series.values();

    std::vector<double> x, y;
    std::size_t i = 0;
    while (i < n) {
        if (!series[i]) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        while (i < n && series[i]) ++i;
        const std::size_t end = i;
        if (end - begin < cfg.savgol_window) continue;

        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t lo = k >= begin + half ? k - half : begin;
            const std::size_t hi = std::min(end, k + half + 1);
            x.clear();
            y.clear();
            for (std::size_t j = lo; j < hi; ++j) {
                x.push_back(static_cast<double>(j));
                y.push_back(*series[j]);
            }
            const std::size_t order = std::min(cfg.savgol_order, x.size() - 1);
            out[k] = polyfit_eval(x, y, order, static_cast<double>(k));
        }
    }
    return WeeklySeries(series.grid(), std::move(out));
}

std::vector<InterpolatorScore> compare_interpolators(std::span<const WeeklySeries> series_set,
                                                     std::size_t drop_count, std::uint64_t seed,
                                                     std::span<const Interpolator> methods,
                                                     const GapFillConfig& cfg) {
    std::mt19937_64 rng(seed);

    struct Holdout {
        WeeklySeries masked;
        std::vector<std::size_t> slots;
        std::vector<double> truth;
    };
    std::vector<Holdout> holdouts;
    holdouts.reserve(series_set.size());
    for (std::size_t s = 0; s < series_set.size(); ++s) {
        const auto& series = series_set[s];
        if (series.present_count() < drop_count + 3) {
            throw Error(ErrorCode::InvalidInput, "series " + std::to_string(s) + " has " +
                                                     std::to_string(series.present_count()) +
                                                     " present values; need drop_count + 3");
        }
        std::vector<std::size_t> candidates;
        for (std::size_t k = 1; k + 1 < series.size(); ++k) {
            if (series[k - 1] && series[k] && series[k + 1]) candidates.push_back(k);
        }
        std::shuffle(candidates.begin(), candidates.end(), rng);
        std::vector<std::size_t> chosen;
        std::vector<bool> blocked(series.size(), false);
        for (auto k : candidates) {
            if (chosen.size() == drop_count) break;
            if (blocked[k]) continue;
            chosen.push_back(k);
            blocked[k] = blocked[k - 1] = blocked[k + 1] = true;
        }
        if (chosen.size() < drop_count) {
            throw Error(ErrorCode::InvalidInput, "series " + std::to_string(s) + ": cannot hold out " +
                                                     std::to_string(drop_count) + " non-adjacent values");
        }
        std::sort(chosen.begin(), chosen.end());
        auto values = series.values();
        std::vector<double> truth;
        for (auto k : chosen) {
            truth.push_back(*values[k]);
            values[k].reset();
        }
        holdouts.push_back({WeeklySeries(series.grid(), std::move(values)), std::move(chosen), std::move(truth)});
    }

    std::vector<InterpolatorScore> scores;
    for (auto method : methods) {
        GapFillConfig c = cfg;
        c.interpolator = method;
        c.l_max = std::max<std::size_t>(c.l_max, 1);
        InterpolatorScore score{method, std::nullopt, 0, 0};
        std::vector<double> truth, pred;
        for (const auto& h : holdouts) {
            const auto filled = fill_gaps(h.masked, c).series;
            for (std::size_t j = 0; j < h.slots.size(); ++j) {
                if (filled[h.slots[j]]) {
                    truth.push_back(h.truth[j]);
                    pred.push_back(*filled[h.slots[j]]);
                    ++score.scored;
                } else {
                    ++score.unfilled;
                }
            }
        }
        if (!truth.empty()) {
            const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
            double sse = 0.0, sst = 0.0;
            for (std::size_t j = 0; j < truth.size(); ++j) {
                sse += (truth[j] - pred[j]) * (truth[j] - pred[j]);
                sst += (truth[j] - mean) * (truth[j] - mean);
            }
            if (sst > 0.0) score.r2 = 1.0 - sse / sst;
        }
        scores.push_back(score);
    }
    return scores;
}

}  // namespace vegcast
