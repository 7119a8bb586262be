#include "vegcast/ar.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace vegcast::ar {

void ARConfig::validate() const {
    if (order < 1) throw Error(ErrorCode::Config, "AR order must be at least 1");
    if (lead < 1) throw Error(ErrorCode::Config, "AR lead must be at least 1");
    if (train_length < order + lead + 10) {
        throw Error(ErrorCode::Config, "AR train length must be at least order + lead + 10");
    }
    if (!(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0)) {
        throw Error(ErrorCode::Config, "min_valid_fraction must lie in [0, 1]");
    }
}

const char* to_string(Reason r) {
    switch (r) {
        case Reason::Ok: return "OK";
        case Reason::Gap: return "GAP";
        case Reason::InsufficientHistory: return "INSUFFICIENT_HISTORY";
        case Reason::NotOnGrid: return "NOT_ON_GRID";
        case Reason::Degenerate: return "DEGENERATE";
    }
    return "UNKNOWN";
}

namespace {

struct LeastSquares {
    Eigen::VectorXd beta;
    double sse = 0.0;
    bool degenerate = false;
    bool ridge = false;
};

/// Normal equations with a ridge of 1e-8 * trace when cond(X'X) > 1e12.
LeastSquares solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    LeastSquares out;
    const Eigen::MatrixXd g = x.transpose() * x;
    const Eigen::VectorXd b = x.transpose() * y;
    const double trace = g.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) {
        out.beta = Eigen::VectorXd::Zero(x.cols());
        out.degenerate = true;
        out.sse = y.squaredNorm();
        return out;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    Eigen::MatrixXd a = g;
    if (!(lo > 0.0) || hi / lo > 1e12) {
        a.diagonal().array() += 1e-8 * trace;
        out.ridge = true;
    }
    out.beta = a.ldlt().solve(b);
    if (!out.beta.allFinite()) {
        out.beta = Eigen::VectorXd::Zero(x.cols());
        out.degenerate = true;
    }
    out.sse = (y - x * out.beta).squaredNorm();
    return out;
}

}  // namespace

double ARModel::predict(std::span<const double> recent) const {
    double v = training_mean;
    for (std::size_t i = 0; i < coefficients.size(); ++i) v += coefficients[i] * (recent[i] - training_mean);
    return v;
}

ARModel ar_fit(std::span<const std::optional<double>> window, const ARConfig& cfg) {
    const std::size_t p = cfg.order, n = cfg.lead, len = window.size();
    if (p < 1 || n < 1 || len < p + n + 1) {
        throw Error(ErrorCode::InvalidInput, "AR window too short for order and lead");
    }
    ARModel model;
    model.lead = n;
    model.coefficients.assign(p, 0.0);

    if (cfg.demean) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& v : window) {
            if (v) {
                sum += *v;
                ++count;
            }
        }
        if (count > 0) model.training_mean = sum / static_cast<double>(count);
    }

    std::vector<std::size_t> rows;
    for (std::size_t t = p - 1; t + n < len; ++t) {
        bool ok = window[t + n].has_value();
        for (std::size_t i = 0; i < p && ok; ++i) ok = window[t - i].has_value();
        if (ok) rows.push_back(t);
    }
    model.rows = rows.size();
    if (rows.empty()) {
        model.degenerate = true;
        return model;
    }

    const double m = model.training_mean;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t t = rows[r];
        for (std::size_t i = 0; i < p; ++i) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = *window[t - i] - m;
        y(static_cast<Eigen::Index>(r)) = *window[t + n] - m;
    }
    const LeastSquares ls = solve_least_squares(x, y);
    model.degenerate = ls.degenerate;
    model.ridge = ls.ridge;
    for (std::size_t i = 0; i < p; ++i) model.coefficients[i] = ls.beta(static_cast<Eigen::Index>(i));
    model.residual_std = std::sqrt(ls.sse / static_cast<double>(rows.size()));
    return model;
}

ARModel ar_fit(std::span<const double> window, const ARConfig& cfg) {
    std::vector<std::optional<double>> w(window.begin(), window.end());
    return ar_fit(std::span<const std::optional<double>>(w), cfg);
}

Reason check_window(const WeeklySeries& series, std::size_t issue_slot, const ARConfig& cfg) {
    const std::size_t p = cfg.order, n = cfg.lead, t_len = cfg.train_length;
    if (issue_slot >= series.size() || issue_slot + 1 < t_len) return Reason::InsufficientHistory;
    const std::size_t first = issue_slot + 1 - t_len;
    for (std::size_t i = 0; i < p; ++i) {
        if (!series[issue_slot - i]) return Reason::Gap;
    }
    if (cfg.strict_window) {
        for (std::size_t k = first; k <= issue_slot; ++k) {
            if (!series[k]) return Reason::Gap;
        }
        return Reason::Ok;
    }
    std::size_t valid = 0;
    for (std::size_t t = first + p - 1; t + n <= issue_slot; ++t) {
        bool ok = series[t + n].has_value();
        for (std::size_t i = 0; i < p && ok; ++i) ok = series[t - i].has_value();
        if (ok) ++valid;
    }
    const double needed = cfg.min_valid_fraction * static_cast<double>(t_len - p - n);
    return static_cast<double>(valid) >= needed ? Reason::Ok : Reason::Gap;
}

Forecast ar_forecast(const IndexSeries& series, Date issue_date, const ARConfig& cfg) {
    cfg.validate();
    const auto& s = series.series();
    const auto slot = s.grid().slot_at(issue_date);
    if (!slot) return {std::nullopt, Reason::NotOnGrid};
    const Reason reason = check_window(s, *slot, cfg);
    if (reason != Reason::Ok) return {std::nullopt, reason};

    const std::size_t first = *slot + 1 - cfg.train_length;
    const auto window = std::span<const std::optional<double>>(s.values()).subspan(first, cfg.train_length);
    const ARModel model = ar_fit(window, cfg);
    std::vector<double> recent(cfg.order);
    for (std::size_t i = 0; i < cfg.order; ++i) recent[i] = *s[*slot - i];
    return {model.predict(recent), Reason::Ok};
}

Forecast persistence_forecast(const IndexSeries& series, Date issue_date, std::size_t /*lead*/) {
    const auto& s = series.series();
    const auto slot = s.grid().slot_at(issue_date);
    if (!slot) return {std::nullopt, Reason::NotOnGrid};
    if (!s[*slot]) return {std::nullopt, Reason::Gap};
    return {*s[*slot], Reason::Ok};
}

GrangerFit granger_fit(std::span<const double> target, std::span<const double> source, std::size_t p,
                       std::size_t q, std::size_t n, bool demean) {
    if (target.size() != source.size()) {
        throw Error(ErrorCode::InvalidInput, "Granger windows differ in length");
    }
    if (p < 1 || q < 1 || n < 1) throw Error(ErrorCode::InvalidInput, "Granger lags and lead must be >= 1");
    const std::size_t len = target.size();
    const std::size_t lag = std::max(p, q);
    if (len < lag + n + p + q) throw Error(ErrorCode::InvalidInput, "Granger window too short");

    auto mean_of = [&](std::span<const double> v) {
        if (!demean) return 0.0;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double mx = mean_of(target), my = mean_of(source);

    const auto rows = static_cast<Eigen::Index>(len - n - (lag - 1));
    Eigen::MatrixXd xr(rows, static_cast<Eigen::Index>(p));
    Eigen::MatrixXd xe(rows, static_cast<Eigen::Index>(p + q));
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = static_cast<std::size_t>(r) + lag - 1;
        for (std::size_t i = 0; i < p; ++i) {
            xr(r, static_cast<Eigen::Index>(i)) = xe(r, static_cast<Eigen::Index>(i)) = target[t - i] - mx;
        }
        for (std::size_t i = 0; i < q; ++i) xe(r, static_cast<Eigen::Index>(p + i)) = source[t - i] - my;
        y(r) = target[t + n] - mx;
    }
    const LeastSquares reduced = solve_least_squares(xr, y);
    const LeastSquares extended = solve_least_squares(xe, y);
    GrangerFit out;
    out.reduced_rmse = std::sqrt(reduced.sse / static_cast<double>(rows));
    out.extended_rmse = std::sqrt(extended.sse / static_cast<double>(rows));
    if (reduced.degenerate || extended.degenerate || !(out.reduced_rmse > 0.0)) {
        out.degenerate = true;
        out.pct_reduction = 0.0;
        return out;
    }
    out.pct_reduction = 100.0 * (1.0 - out.extended_rmse / out.reduced_rmse);
    return out;
}

GrangerMatrix granger_matrix(std::span<const IndexSeries> regions, const GrangerConfig& cfg) {
    if (regions.size() < 2) throw Error(ErrorCode::InvalidInput, "Granger analysis needs at least two regions");
    const TimeGrid& grid = regions.front().series().grid();
    for (const auto& r : regions) {
        if (!(r.series().grid() == grid)) {
            throw Error(ErrorCode::InvalidInput, "Granger regions must share one time grid");
        }
    }
    const std::size_t t_len = cfg.ar.train_length;
    const std::size_t stride = std::max<std::size_t>(cfg.window_stride, 1);
    const std::size_t len = grid.length();

    // gaps[k] = number of gaps in slots [0, k)
    std::vector<std::vector<std::size_t>> gaps(regions.size(), std::vector<std::size_t>(len + 1, 0));
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const auto& s = regions[r].series();
        for (std::size_t k = 0; k < len; ++k) gaps[r][k + 1] = gaps[r][k] + (s[k] ? 0 : 1);
    }

    GrangerMatrix out;
    for (std::size_t to = 0; to < regions.size(); ++to) {
        for (std::size_t from = 0; from < regions.size(); ++from) {
            if (from == to) continue;
            GrangerEntry e{regions[from].region_id(), regions[to].region_id(), 0.0, 0};
            double sum = 0.0;
            std::vector<double> x(t_len), y(t_len);
            for (std::size_t end = t_len; end <= len; end += stride) {
                const std::size_t begin = end - t_len;
                if (gaps[to][end] != gaps[to][begin] || gaps[from][end] != gaps[from][begin]) continue;
                for (std::size_t k = 0; k < t_len; ++k) {
                    x[k] = *regions[to].series()[begin + k];
                    y[k] = *regions[from].series()[begin + k];
                }
                const GrangerFit fit = granger_fit(x, y, cfg.ar.order, cfg.source_lags, cfg.ar.lead, cfg.ar.demean);
                sum += fit.pct_reduction;
                ++e.windows;
            }
            if (e.windows == 0) {
                out.absent.emplace_back(e, "no window of " + std::to_string(t_len) + " weeks where both are gap-free");
                continue;
            }
            e.mean_pct_reduction = sum / static_cast<double>(e.windows);
            out.all_pairs.push_back(e);
            if (e.mean_pct_reduction >= cfg.threshold_pct) out.entries.push_back(e);
        }
    }
    return out;
}

}  // namespace vegcast::ar
