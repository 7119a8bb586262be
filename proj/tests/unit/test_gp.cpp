#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "vegcast/gp.hpp"

using namespace vegcast;
using namespace vegcast::gp;

namespace {

Kernel with_params(const std::string& structure, std::mt19937_64& rng) {
    Kernel k = Kernel::parse(structure);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    std::vector<double> p(k.num_params());
    for (auto& v : p) v = u(rng);
    k.set_log_params(p);
    return k;
}

std::vector<double> seasonal_values(const std::vector<double>& t, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<double> y;
    for (double x : t) y.push_back(0.5 + 0.2 * std::sin(2.0 * std::numbers::pi * x / 52.0) + noise(rng));
    return y;
}

std::vector<double> range(std::size_t n, double step = 1.0) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) * step;
    return t;
}

}  // namespace

TEST_CASE("kernel structures parse and print") {
    CHECK(Kernel::parse("RBF").num_params() == 2);
    CHECK(Kernel::parse("PERIODIC").num_params() == 2);
    CHECK(Kernel::parse("RQ").num_params() == 3);
    CHECK(Kernel::parse("LINEAR").num_params() == 1);
    const Kernel k = Kernel::parse("LINEAR*RBF+PERIODIC");
    CHECK(Kernel::parse(k.structure()).structure() == k.structure());
    CHECK(k.param_names().size() == k.num_params());
    CHECK_THROWS_AS(Kernel::parse("RBF+"), Error);
    CHECK_THROWS_AS(Kernel::parse("SQUIGGLE"), Error);
}

TEST_CASE("kernels are symmetric and their Gram matrices are PSD") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (const char* s : {"RBF", "PERIODIC", "RQ", "MATERN32", "MATERN52", "LINEAR", "RBF+PERIODIC", "RBF*PERIODIC",
                          "LINEAR*MATERN52"}) {
        const Kernel k = with_params(s, rng);
        std::vector<double> t(40);
        for (auto& x : t) x = u(rng);
        for (int i = 0; i < 20; ++i) CHECK(k(t[i], t[i + 1]) == doctest::Approx(k(t[i + 1], t[i])).epsilon(1e-14));
        const Eigen::MatrixXd g = gram_matrix(k, t);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
        INFO(s);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * eig.eigenvalues().maxCoeff());
    }
}

TEST_CASE("kernel gradients match finite differences") {
    std::mt19937_64 rng(2);
    for (const char* s : {"RBF", "PERIODIC", "RQ", "MATERN32", "MATERN52", "LINEAR", "RBF+PERIODIC", "RQ*MATERN32"}) {
        Kernel k = with_params(s, rng);
        const double t = 3.7, u = -1.4;
        std::vector<double> grad(k.num_params());
        k.eval_grad(t, u, grad);
        const auto p0 = k.log_params();
        for (std::size_t i = 0; i < p0.size(); ++i) {
            auto p = p0;
            const double h = 1e-6;
            p[i] = p0[i] + h;
            k.set_log_params(p);
            const double up = k(t, u);
            p[i] = p0[i] - h;
            k.set_log_params(p);
            const double down = k(t, u);
            k.set_log_params(p0);
            INFO(s, " param ", i);
            CHECK(grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1e-3));
        }
    }
}

TEST_CASE("log marginal likelihood gradient matches finite differences") {
    std::mt19937_64 rng(3);
    const auto t = range(30, 1.5);
    const auto y = seasonal_values(t, 4);
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - 0.5;
    for (const char* s : {"RBF", "RBF+PERIODIC", "MATERN52"}) {
        Kernel k = with_params(s, rng);
        const double log_noise = std::log(0.05);
        const auto lml = log_marginal_likelihood(k, log_noise, t, r, true);
        const auto p0 = k.log_params();
        const double h = 1e-5;
        for (std::size_t i = 0; i < p0.size(); ++i) {
            auto p = p0;
            p[i] += h;
            k.set_log_params(p);
            const double up = log_marginal_likelihood(k, log_noise, t, r, false).value;
            p[i] -= 2 * h;
            k.set_log_params(p);
            const double down = log_marginal_likelihood(k, log_noise, t, r, false).value;
            k.set_log_params(p0);
            INFO(s, " param ", i);
            CHECK(lml.gradient[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4).scale(1e-6));
        }
        const double up = log_marginal_likelihood(k, log_noise + h, t, r, false).value;
        const double down = log_marginal_likelihood(k, log_noise - h, t, r, false).value;
        CHECK(lml.gradient.back() == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4).scale(1e-6));
    }
}

TEST_CASE("LML of a single point equals the Gaussian density") {
    Kernel k = Kernel::parse("RBF");
    const double sig = 0.3, noise = 0.1;
    k.set_log_params(std::vector<double>{std::log(sig), std::log(4.0)});
    const std::vector<double> t{0.0}, r{0.2};
    const double var = sig * sig + noise * noise;
    const double expected = -0.5 * r[0] * r[0] / var - 0.5 * std::log(var) - 0.5 * std::log(2 * std::numbers::pi);
    CHECK(log_marginal_likelihood(k, std::log(noise), t, r, false).value == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("posterior reverts to the prior far from the data") {
    Kernel k = Kernel::parse("RBF");
    k.set_log_params(std::vector<double>{std::log(0.2), std::log(3.0)});
    const auto t = range(20);
    const auto y = seasonal_values(t, 5);
    const GPModel m(k, 0.45, 0.03, t, y);
    const auto far = m.predict(500.0);
    CHECK(far.mean == doctest::Approx(0.45).epsilon(1e-9));
    CHECK(far.std == doctest::Approx(std::sqrt(0.04 + 0.0009)).epsilon(1e-9));
    const auto near = m.predict(10.0);
    CHECK(near.std < far.std);
    CHECK(std::abs(near.mean - y[10]) < 0.05);
}

TEST_CASE("more observations never increase predictive variance") {
    Kernel k = Kernel::parse("RBF+PERIODIC");
    k.set_log_params(std::vector<double>{std::log(0.1), std::log(5.0), std::log(0.15), std::log(1.0)});
    const auto t = range(60);
    const auto y = seasonal_values(t, 6);
    double previous = INFINITY;
    for (std::size_t n = 5; n <= 60; n += 5) {
        std::vector<double> ts(t.begin(), t.begin() + static_cast<long>(n));
        std::vector<double> ys(y.begin(), y.begin() + static_cast<long>(n));
        const GPModel m(k, 0.5, 0.02, ts, ys);
        const double s = m.predict(65.0).std;
        CHECK(s <= previous + 1e-12);
        previous = s;
    }
}

TEST_CASE("fit recovers a smooth seasonal signal and kernel search ranks by LML") {
    const auto t = range(80);
    const auto y = seasonal_values(t, 7);
    FitOptions opt;
    opt.seed = 9;
    const GPModel m = gp_fit(t, y, Kernel::parse("RBF+PERIODIC"), opt);
    CHECK(m.mean() == doctest::Approx(std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size())));
    CHECK(m.noise_std() < 0.06);
    const auto pred = m.predict(40.5);
    CHECK(pred.mean == doctest::Approx(0.5 + 0.2 * std::sin(2.0 * std::numbers::pi * 40.5 / 52.0)).epsilon(0.1));

    const std::vector<Primitive> cands{Primitive::Rbf, Primitive::Periodic, Primitive::Linear};
    opt.restarts = 3;
    const auto ranked = kernel_search(t, y, cands, opt);
    CHECK(ranked.size() == 3 + 3 + 3);
    const auto raw = kernel_search(t, y, cands, opt, 0.0);
    for (std::size_t i = 1; i < raw.size(); ++i) {
        if (!raw[i].failed) CHECK(raw[i - 1].log_marginal_likelihood >= raw[i].log_marginal_likelihood);
    }
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        if (ranked[i].failed) continue;
        CHECK_FALSE(ranked[i - 1].failed);
        CHECK(ranked[i - 1].score >= ranked[i].score);
        CHECK(ranked[i].score < ranked[i].log_marginal_likelihood);
    }
}

TEST_CASE("fits are deterministic for a seed") {
    const auto t = range(40);
    const auto y = seasonal_values(t, 8);
    FitOptions opt;
    opt.seed = 17;
    const GPModel a = gp_fit(t, y, Kernel::parse("RBF"), opt);
    const GPModel b = gp_fit(t, y, Kernel::parse("RBF"), opt);
    CHECK(a.log_marginal_likelihood() == b.log_marginal_likelihood());
    CHECK(a.kernel().log_params() == b.kernel().log_params());
}

TEST_CASE("too little data is rejected") {
    const auto t = range(5);
    const std::vector<double> y(5, 0.3);
    CHECK_THROWS_AS(gp_fit(t, y, Kernel::parse("RBF")), Error);
}

TEST_CASE("forecast-mode gap-filling ignores samples after the cutoff") {
    const TimeGrid grid(parse_date("2000-01-01"), 60);
    std::vector<Sample> a, b;
    for (std::size_t i = 0; i < 60; ++i) {
        const double v = 0.4 + 0.1 * std::sin(static_cast<double>(i) / 5.0);
        a.push_back({grid.date(i), v, Quality::Good});
        b.push_back({grid.date(i), i > 40 ? 0.9 : v, Quality::Good});
    }
    Kernel k = Kernel::parse("RBF");
    k.set_log_params(std::vector<double>{std::log(0.1), std::log(4.0)});
    GapfillOptions opt;
    opt.mode = GapfillMode::Forecast;
    opt.cutoff = grid.date(40);
    opt.fixed = FixedHyperparameters{k, 0.4, 0.01};
    const auto fa = gp_gapfill(ObservationSeries("p", "r", a), grid, opt);
    const auto fb = gp_gapfill(ObservationSeries("p", "r", b), grid, opt);
    REQUIRE(fa.series);
    REQUIRE(fb.series);
    CHECK(*fa.series == *fb.series);

    opt.mode = GapfillMode::NonForecast;
    const auto na = gp_gapfill(ObservationSeries("p", "r", a), grid, opt);
    const auto nb = gp_gapfill(ObservationSeries("p", "r", b), grid, opt);
    CHECK_FALSE(*na.series == *nb.series);

    opt.mode = GapfillMode::Forecast;
    opt.cutoff = grid.date(59);
    const auto late = gp_gapfill(ObservationSeries("p", "r", a), grid, opt);
    CHECK(*late.series == *na.series);
}

TEST_CASE("gap-filling with too few good samples reports a reason") {
    const TimeGrid grid(parse_date("2000-01-01"), 20);
    std::vector<Sample> s;
    for (std::size_t i = 0; i < 20; ++i) s.push_back({grid.date(i), 0.3, i < 5 ? Quality::Good : Quality::Bad});
    const auto out = gp_gapfill(ObservationSeries("p", "r", s), grid, {});
    CHECK_FALSE(out.series);
    CHECK(out.reason.rfind("INSUFFICIENT_HISTORY", 0) == 0);
}

TEST_CASE("GP forecasts need enough history and only look backwards") {
    const TimeGrid grid(parse_date("2000-01-01"), 200);
    std::vector<std::optional<double>> v(200);
    for (std::size_t i = 0; i < 200; ++i) v[i] = 50.0 + 20.0 * std::sin(static_cast<double>(i) / 8.0);
    const IndexSeries s(WeeklySeries(grid, v), IndexKind::Vci3m, "r");
    auto w = v;
    for (std::size_t i = 151; i < 200; ++i) w[i] = 5.0;
    const IndexSeries s2(WeeklySeries(grid, w), IndexKind::Vci3m, "r");

    GpForecastOptions opt;
    opt.fit.restarts = 2;
    const auto early = gp_forecast(s, grid.date(30), 4, opt);
    CHECK_FALSE(early.value);
    CHECK(early.reason.rfind("INSUFFICIENT_HISTORY", 0) == 0);

    const std::size_t leads[] = {1, 4};
    const auto fa = gp_forecast_leads(s, grid.date(150), leads, opt);
    const auto fb = gp_forecast_leads(s2, grid.date(150), leads, opt);
    REQUIRE(fa[0].value);
    CHECK(fa[0].value->mean == fb[0].value->mean);
    CHECK(fa[1].value->std == fb[1].value->std);
    CHECK(fa[0].value->mean == doctest::Approx(*v[151]).epsilon(0.05));

    const IndexSeries vci(WeeklySeries(grid, v), IndexKind::Vci, "r");
    CHECK_THROWS_AS(gp_forecast(vci, grid.date(150), 1, opt), Error);
}

TEST_CASE("model files round-trip") {
    const auto t = range(30);
    const auto y = seasonal_values(t, 10);
    const GPModel m = gp_fit(t, y, Kernel::parse("RBF+PERIODIC"));
    std::stringstream buf;
    write_model(buf, m);
    const StoredModel back = read_model(buf);
    CHECK(back.kernel.structure() == m.kernel().structure());
    CHECK(back.mean == m.mean());
    CHECK(back.noise_std == m.noise_std());
    CHECK(back.log_marginal_likelihood == m.log_marginal_likelihood());
    const auto a = back.kernel.log_params(), b = m.kernel().log_params();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
    std::istringstream bad("kernel=RBF\n");
    CHECK_THROWS_AS(read_model(bad), Error);
}
