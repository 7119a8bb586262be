#include "vegcast/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace vegcast::optimize {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double> x0, const std::vector<double>& lower,
                           const std::vector<double>& upper, const LbfgsOptions& options) {
    const std::size_t n = x0.size();
    auto project = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    };
    auto active = [&](const std::vector<double>& x, const std::vector<double>& g, std::size_t i) {
        return (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0);
    };

    LbfgsResult result;
    std::vector<double> x = std::move(x0);
    project(x);
    std::vector<double> g(n, 0.0);
    double fx = f(x, g);
    ++result.evaluations;
    if (!std::isfinite(fx)) {
        result.x = x;
        result.value = fx;
        return result;
    }

    std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;
    std::vector<double> pg(n), d(n), xn(n), gn(n);

    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        result.iterations = iter + 1;
        double pg_max = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pg[i] = active(x, g, i) ? 0.0 : g[i];
            pg_max = std::max(pg_max, std::abs(pg[i]));
        }
        if (pg_max < options.gradient_tolerance) {
            result.converged = true;
            break;
        }

        // two-loop recursion on the free variables
        d = pg;
        std::vector<double> alpha(memory.size());
        for (std::size_t k = memory.size(); k-- > 0;) {
            const auto& [s, y] = memory[k];
            alpha[k] = dot(s, d) / dot(y, s);
            for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * y[i];
        }
        if (!memory.empty()) {
            const auto& [s, y] = memory.back();
            const double gamma = dot(s, y) / dot(y, y);
            for (auto& v : d) v *= gamma;
        }
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const auto& [s, y] = memory[k];
            const double beta = dot(y, d) / dot(y, s);
            for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * s[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = active(x, g, i) ? 0.0 : -d[i];
        }
        if (dot(d, pg) >= 0.0) {
            memory.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
        }

        double step = memory.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(pg, pg))) : 1.0;
        bool accepted = false;
        double fn = fx;
        for (int tries = 0; tries < 40; ++tries) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
            project(xn);
            fn = f(xn, gn);
            ++result.evaluations;
            double decrease = 0.0;
            for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (xn[i] - x[i]);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * decrease) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (memory.empty()) {
                // no progress possible along the steepest descent direction
                result.converged = true;
                break;
            }
            memory.clear();
            continue;
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        if (dot(s, y) > 1e-12 * std::max(1.0, dot(y, y))) {
            memory.emplace_back(std::move(s), std::move(y));
            if (memory.size() > options.memory) memory.pop_front();
        }
        const double change = std::abs(fx - fn);
        x.swap(xn);
        g.swap(gn);
        fx = fn;
        if (change <= options.relative_tolerance * (1.0 + std::abs(fx))) {
            result.converged = true;
            break;
        }
    }
    result.x = std::move(x);
    result.value = fx;
    return result;
}

}  // namespace vegcast::optimize
