#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "vegcast/types.hpp"

using namespace vegcast;
using namespace std::chrono;

TEST_CASE("dates parse, format and reject garbage") {
    const Date d = parse_date("2016-02-29");
    CHECK(format_date(d) == "2016-02-29");
    CHECK_THROWS_AS(parse_date("2015-02-29"), Error);
    CHECK_THROWS_AS(parse_date("2015-2-9"), Error);
    CHECK_THROWS_AS(parse_date("yesterday"), Error);
    try {
        parse_date("2015-13-01");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
}

TEST_CASE("ISO weeks against known calendar facts") {
    CHECK(iso_week(parse_date("2021-01-01")) == 53);  // Friday in 2020's week 53
    CHECK(iso_week(parse_date("2021-01-04")) == 1);
    CHECK(iso_week(parse_date("2019-12-30")) == 1);   // Monday of 2020-W01
    CHECK(iso_week(parse_date("2015-12-31")) == 53);
    CHECK(week_of_year(parse_date("2015-12-31")) == 52);
    CHECK(week_of_year(parse_date("2016-06-15")) == iso_week(parse_date("2016-06-15")));
}

TEST_CASE("week of year advances by one per week, modulo folding") {
    Date d = parse_date("2000-01-01");
    for (int i = 0; i < 20 * 52; ++i) {
        const int a = week_of_year(d), b = week_of_year(d + days{7});
        const bool wraps = b == 1 && (a == 52);
        const bool folded = a == 52 && b == 52;
        CHECK((b == a + 1 || wraps || folded));
        d += days{7};
    }
}

TEST_CASE("TimeGrid slots share the anchor weekday") {
    const TimeGrid g = TimeGrid::covering(parse_date("2000-01-03"), parse_date("2000-03-01"));
    CHECK(weekday{g.start()} == Saturday);
    for (std::size_t i = 0; i < g.length(); ++i) CHECK(weekday{g.date(i)} == Saturday);
    CHECK(g.slot_containing(parse_date("2000-01-03")).has_value());
    CHECK(g.slot_containing(parse_date("2000-03-01")).has_value());
    CHECK_THROWS_AS(TimeGrid(g.start(), 0), Error);
}

TEST_CASE("align_to_grid maps windows and masks bad samples") {
    const TimeGrid g(parse_date("2000-01-01"), 10);
    const Date slot3 = g.date(3);
    ObservationSeries obs("p", "r",
                          {{slot3 - days{9}, 0.1, Quality::Good},
                           {slot3 - days{2}, 0.2, Quality::Good},
                           {slot3, 0.3, Quality::Good},
                           {slot3 + days{1}, 0.4, Quality::Bad}});
    const auto out = align_to_grid(obs, g);
    REQUIRE(out.size() == 3);
    CHECK(out[0].slot == 2);
    CHECK(out[1].slot == 3);
    CHECK(out[1].value == 0.2);
    CHECK(out[2].slot == 3);
}

TEST_CASE("align_to_grid lists out-of-range dates") {
    const TimeGrid g(parse_date("2000-01-01"), 2);
    ObservationSeries obs("p", "r", {{parse_date("1999-12-01"), 0.1, Quality::Good},
                                     {parse_date("2000-03-01"), 0.1, Quality::Good}});
    try {
        align_to_grid(obs, g);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfRange);
        const std::string what = e.what();
        CHECK(what.find("1999-12-01") != std::string::npos);
        CHECK(what.find("2000-03-01") != std::string::npos);
    }
}

TEST_CASE("observation series validation") {
    const Date d = parse_date("2000-01-01");
    CHECK_THROWS_AS(ObservationSeries("p", "r", {{d, 0.1, Quality::Good}, {d, 0.2, Quality::Good}}), Error);
    CHECK_THROWS_AS(ObservationSeries("p", "r", {{d, 1.5, Quality::Good}}), Error);
    CHECK_NOTHROW(ObservationSeries("p", "r", {{d, 7.0, Quality::Bad}}));
}

TEST_CASE("index series range invariants") {
    const TimeGrid g(parse_date("2000-01-01"), 3);
    CHECK_NOTHROW(IndexSeries(WeeklySeries(g, {0.0, std::nullopt, 100.0}), IndexKind::Vci, "r"));
    CHECK_NOTHROW(IndexSeries(WeeklySeries(g, {-1e-10, 50.0, 100.0 + 1e-10}), IndexKind::Vci3m, "r"));
    CHECK_THROWS_AS(IndexSeries(WeeklySeries(g, {0.0, 101.0, 1.0}), IndexKind::Vci, "r"), Error);
    CHECK_THROWS_AS(IndexSeries(WeeklySeries(g, {0.0, 1.2, 1.0}), IndexKind::Ndvi, "r"), Error);
    CHECK_NOTHROW(IndexSeries(WeeklySeries(g, {-3.0, 1.2, 1.0}), IndexKind::NdviAnomaly, "r"));
    CHECK(parse_index_kind(to_string(IndexKind::Vci3m)) == IndexKind::Vci3m);
}

TEST_CASE("categorize follows the stated boundaries") {
    CHECK(categorize(60) == DroughtCategory::Wet);
    CHECK(categorize(50) == DroughtCategory::Normal);
    CHECK(categorize(35.0001) == DroughtCategory::Normal);
    CHECK(categorize(35) == DroughtCategory::Moderate);
    CHECK(categorize(20) == DroughtCategory::Severe);
    CHECK(categorize(10) == DroughtCategory::Extreme);
    CHECK(categorize(0) == DroughtCategory::Extreme);
    CHECK(categorize(-5) == DroughtCategory::Extreme);
    CHECK_THROWS_AS(categorize(std::nan("")), Error);
    CHECK_THROWS_AS(categorize(std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("categorize agrees with the alert rule except at the boundary") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10.0, 110.0);
    for (int i = 0; i < 10000; ++i) {
        const double v = u(rng);
        const auto c = categorize(v);
        const bool drought = c == DroughtCategory::Moderate || c == DroughtCategory::Severe || c == DroughtCategory::Extreme;
        CHECK(drought == (v < kDroughtAlertThreshold));
    }
}

TEST_CASE("WeeklySeries with() replaces one slot") {
    const TimeGrid g(parse_date("2000-01-01"), 3);
    const WeeklySeries s(g, {1.0, std::nullopt, 3.0});
    const auto t = s.with(1, 2.0);
    CHECK(t[1] == 2.0);
    CHECK_FALSE(s.present(1));
    CHECK(t.present_count() == 3);
    CHECK_THROWS_AS(WeeklySeries(g, {1.0}), Error);
}
