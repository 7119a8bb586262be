#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "vegcast/evaluate.hpp"

using namespace vegcast;
using namespace vegcast::eval;

namespace {

ForecastRecord rec(double predicted, double truth, std::size_t day = 0, std::string region = "r") {
    ForecastRecord r;
    r.region_id = std::move(region);
    r.issue_date = parse_date("2010-01-02") + std::chrono::days{7 * static_cast<int>(day)};
    r.lead = 1;
    r.predicted = predicted;
    r.truth = truth;
    return r;
}

std::vector<ForecastRecord> random_records(std::size_t n, std::uint64_t seed, double noise = 10.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::normal_distribution<double> e(0.0, noise);
    std::vector<ForecastRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = u(rng);
        out.push_back(rec(std::clamp(t + e(rng), 0.0, 100.0), t, i));
    }
    return out;
}

}  // namespace

TEST_CASE("R2, S and RMSE on a hand-worked example") {
    const std::vector<ForecastRecord> r{rec(1, 1), rec(2, 2), rec(3, 3), rec(3, 4)};
    // SST = 5, SSE = 1.
    CHECK(*r2_score(r) == doctest::Approx(0.8));
    CHECK(*s_metric(r) == doctest::Approx(100.0 * std::sqrt(0.2)));
    CHECK(rmse(r) == doctest::Approx(0.5));
}

TEST_CASE("S and R2 satisfy S^2 = 100^2 (1 - R2)") {
    const auto r = random_records(300, 1);
    const double s = *s_metric(r), r2 = *r2_score(r);
    CHECK(s * s == doctest::Approx(1e4 * (1 - r2)).epsilon(1e-10));
}

TEST_CASE("metric edge cases") {
    const std::vector<ForecastRecord> flat{rec(1, 5), rec(2, 5), rec(3, 5)};
    CHECK_FALSE(r2_score(flat));
    CHECK_FALSE(s_metric(flat));
    const std::vector<ForecastRecord> one{rec(1, 2)};
    CHECK_THROWS_AS(r2_score(one), Error);
    CHECK_THROWS_AS(rmse(std::span<const ForecastRecord>{}), Error);
    const std::vector<ForecastRecord> perfect{rec(1, 1), rec(2, 2)};
    CHECK(*r2_score(perfect) == 1.0);
}

TEST_CASE("bias regression against closed forms") {
    std::vector<ForecastRecord> r;
    for (int i = 0; i < 10; ++i) r.push_back(rec(i, 2.0 * i + 1.0));
    const auto fit = bias_regression(r);
    REQUIRE(fit);
    CHECK(fit->slope.value == doctest::Approx(2.0));
    CHECK(fit->intercept.value == doctest::Approx(1.0));
    CHECK(fit->slope.stderr_ == doctest::Approx(0.0).epsilon(1e-9).scale(1e-6));

    const std::vector<ForecastRecord> r2{rec(0, 0), rec(1, 2), rec(2, 1), rec(3, 3)};
    // slope = Sxy/Sxx = 4/5, intercept = 1.5 - 0.8*1.5 = 0.3
    // residuals: -0.3, 0.9, -0.9, 0.3 -> SSE 1.8, s^2 = 0.9
    const auto f2 = bias_regression(r2);
    CHECK(f2->slope.value == doctest::Approx(0.8));
    CHECK(f2->intercept.value == doctest::Approx(0.3));
    CHECK(f2->slope.stderr_ == doctest::Approx(std::sqrt(0.9 / 5.0)));
    CHECK(f2->intercept.stderr_ == doctest::Approx(std::sqrt(0.9 * (0.25 + 2.25 / 5.0))));

    const std::vector<ForecastRecord> flat{rec(3, 1), rec(3, 2), rec(3, 5)};
    CHECK_FALSE(bias_regression(flat));
}

TEST_CASE("ROC curve is monotone and AUC is permutation invariant") {
    auto r = random_records(400, 2, 15.0);
    const auto grid = default_binarization_grid();
    CHECK(grid.size() == 201);
    CHECK(std::is_sorted(grid.begin(), grid.end()));
    const auto roc = roc_curve(r, 35.0, grid);
    for (std::size_t i = 1; i < roc.size(); ++i) {
        CHECK(roc[i].hit_rate >= roc[i - 1].hit_rate);
        CHECK(roc[i].false_alarm_rate >= roc[i - 1].false_alarm_rate);
        CHECK(roc[i].tp + roc[i].fn == roc[0].tp + roc[0].fn);
    }
    const double auc = roc_auc(roc);
    CHECK(auc > 0.85);
    std::mt19937_64 rng(3);
    std::shuffle(r.begin(), r.end(), rng);
    CHECK(roc_auc(roc_curve(r, 35.0, grid)) == auc);

    auto random_pred = r;
    std::uniform_real_distribution<double> u(0, 100);
    for (auto& x : random_pred) x.predicted = u(rng);
    CHECK(roc_auc(roc_curve(random_pred, 35.0, grid)) == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("ROC needs both classes") {
    const std::vector<ForecastRecord> wet{rec(40, 60), rec(50, 70)};
    const auto grid = default_binarization_grid();
    CHECK_THROWS_AS(roc_curve(wet, 35.0, grid), Error);
}

TEST_CASE("a perfect forecaster has AUC 1") {
    std::vector<ForecastRecord> r;
    for (int i = 0; i < 100; ++i) r.push_back(rec(i, i));
    CHECK(roc_auc(roc_curve(r, 35.0, default_binarization_grid())) == doctest::Approx(1.0));
}

TEST_CASE("transition skill counts transitions out of normal conditions") {
    std::vector<ForecastRecord> r;
    auto add = [&](double at_issue, double pred, double truth) {
        auto x = rec(pred, truth, r.size());
        x.truth_at_issue = at_issue;
        r.push_back(x);
    };
    add(50, 30, 30);  // hit
    add(50, 40, 30);  // miss
    add(50, 30, 40);  // false alarm
    add(50, 40, 40);  // correct negative
    add(20, 10, 10);  // already in drought: excluded
    auto y = rec(10, 10, 99);
    r.push_back(y);    // no truth at issue
    const double b[] = {35.0};
    const auto t = transition_skill(r, 35.0, b);
    CHECK(t.normal_at_issue == 4);
    CHECK(t.transitions == 2);
    CHECK(t.skipped == 1);
    REQUIRE(t.points.size() == 1);
    CHECK(t.points[0].hits == 1);
    CHECK(t.points[0].misses == 1);
    CHECK(t.points[0].false_alarms == 1);
    CHECK(t.points[0].correct_negatives == 1);
    CHECK(*t.points[0].hit_rate == 0.5);
    CHECK(*t.points[0].false_alarm_ratio == 0.5);
}

TEST_CASE("breakdowns partition the records") {
    std::vector<ForecastRecord> r = random_records(200, 4);
    for (std::size_t i = 0; i < r.size(); ++i) r[i].region_id = i % 3 ? "b" : "a";
    for (auto by : {Breakdown::Category, Breakdown::WeekOfYear, Breakdown::Region}) {
        const auto rows = breakdown_rmse(r, by);
        std::size_t total = 0;
        double sse = 0;
        for (const auto& row : rows) {
            total += row.count;
            sse += row.rmse * row.rmse * static_cast<double>(row.count);
        }
        CHECK(total == r.size());
        CHECK(std::sqrt(sse / static_cast<double>(total)) == doctest::Approx(rmse(r)).epsilon(1e-10));
    }
    const auto regions = breakdown_rmse(r, Breakdown::Region);
    REQUIRE(regions.size() == 2);
    CHECK(regions[0].bucket == "a");
}

TEST_CASE("persistence ratio matches on region, issue date and lead") {
    std::vector<ForecastRecord> m{rec(1, 2, 0), rec(3, 3, 1), rec(5, 5, 7)};
    std::vector<ForecastRecord> p{rec(0, 2, 0), rec(1, 3, 1), rec(9, 9, 8)};
    const auto c = persistence_ratio(m, p);
    CHECK(c.matched == 2);
    CHECK(c.unmatched_method == 1);
    CHECK(c.unmatched_persistence == 1);
    // method rmse sqrt(1/2), persistence rmse sqrt(8/2)
    CHECK(*c.ratio_pct == doctest::Approx(100.0 * std::sqrt(0.5 / 4.0)));
}

TEST_CASE("coverage counts forecastable assessment weeks") {
    const std::size_t n = 300;
    const TimeGrid g(parse_date("2000-01-01"), n);
    std::vector<std::optional<double>> v(n, 50.0);
    for (std::size_t i = 0; i < n; ++i) v[i] = 40.0 + static_cast<double>(i % 9);
    v[270].reset();
    const std::vector<IndexSeries> s{IndexSeries(WeeklySeries(g, v), IndexKind::Vci3m, "r")};
    ar::ARConfig cfg;
    cfg.lead = 1;
    const auto rows = coverage_report(s, cfg, 250);
    REQUIRE(rows.size() == 1);
    // issue slots 250..298; slot 269 loses its target, 270..272 lose a lag.
    CHECK(rows[0].assessed == 49);
    CHECK(rows[0].forecastable == 45);
    CHECK(rows[0].pct == doctest::Approx(100.0 * 45.0 / 49.0));
}

TEST_CASE("clear-pixel buckets and correlation") {
    std::vector<ForecastRecord> r;
    for (int b = 0; b < 5; ++b) {
        for (int k = 0; k < 4; ++k) {
            auto x = rec(50 + (5 - b) * (k % 2 ? 1 : -1), 50, r.size());
            x.clear_fraction = 0.2 * b + 0.01;
            r.push_back(x);
        }
    }
    r.push_back(rec(0, 100));
    const auto rep = clear_pixel_correlation(r);
    CHECK(rep.buckets.size() == 5);
    CHECK(rep.buckets[0].pct == 1);
    CHECK(rep.buckets[0].rmse == doctest::Approx(5.0));
    REQUIRE(rep.pearson_r);
    CHECK(*rep.pearson_r == doctest::Approx(-1.0));
}
