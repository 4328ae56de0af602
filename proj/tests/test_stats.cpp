#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ktune/report.hpp"
#include "ktune/stats.hpp"

using Catch::Matchers::WithinAbs;

namespace {

double trapezoid(const ktune::Kde& kde) {
    double integral = 0.0;
    for (size_t i = 0; i + 1 < kde.x.size(); ++i) {
        integral += 0.5 * (kde.y[i] + kde.y[i + 1]) * (kde.x[i + 1] - kde.x[i]);
    }
    return integral;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find("\r\n", start);
        REQUIRE(end != std::string::npos);  // every row must end in CRLF
        lines.push_back(text.substr(start, end - start));
        start = end + 2;
    }
    return lines;
}

}  // namespace

// =============================================================================
// Summary statistics
// =============================================================================

TEST_CASE("summarize computes the textbook values") {
    // mean = 10/4 = 2.5; squared deviations 2.25+0.25+0.25+2.25 = 5;
    // sample variance 5/3.
    auto s = ktune::summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(s.count == 4);
    CHECK(s.mean == 2.5);
    CHECK_THAT(s.stddev, WithinAbs(std::sqrt(5.0 / 3.0), 1e-12));
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
}

TEST_CASE("summarize of the classic eight-point sample") {
    // mean = 40/8 = 5; squared deviations 9+1+1+1+0+0+4+16 = 32; 32/7.
    auto s = ktune::summarize({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
    CHECK(s.mean == 5.0);
    CHECK_THAT(s.stddev, WithinAbs(std::sqrt(32.0 / 7.0), 1e-12));
    CHECK(s.min == 2.0);
    CHECK(s.max == 9.0);
}

TEST_CASE("a single value has zero spread") {
    auto s = ktune::summarize({7.0});
    CHECK(s.count == 1);
    CHECK(s.mean == 7.0);
    CHECK(s.stddev == 0.0);
    CHECK(s.min == 7.0);
    CHECK(s.max == 7.0);
}

TEST_CASE("summarizing nothing is an error") {
    CHECK_THROWS_AS(ktune::summarize({}), ktune::Error);
}

// =============================================================================
// Kernel density estimation
// =============================================================================

TEST_CASE("the density grid spans the sample range evenly") {
    auto estimate = ktune::kde({1.0, 2.0, 3.0, 4.0, 5.0});
    REQUIRE(estimate.x.size() == 256);
    REQUIRE(estimate.y.size() == 256);
    CHECK(estimate.x.front() == 1.0);
    CHECK(estimate.x.back() == 5.0);
    const double dx = 4.0 / 255.0;
    CHECK_THAT(estimate.x[1] - estimate.x[0], WithinAbs(dx, 1e-12));
    CHECK_THAT(estimate.x[200] - estimate.x[199], WithinAbs(dx, 1e-12));
}

TEST_CASE("the bandwidth follows Silverman's rule") {
    // For {1..5}: sd = sqrt(10/4), iqr = 4 - 2 = 2; iqr/1.34 < sd, so
    // h = 0.9 * (2/1.34) * 5^(-1/5) = 0.97358...
    auto estimate = ktune::kde({1.0, 2.0, 3.0, 4.0, 5.0});
    CHECK_THAT(estimate.bandwidth, WithinAbs(0.97358, 5e-5));
}

TEST_CASE("the reported density integrates to one") {
    auto tight = ktune::kde({1.0, 2.0, 3.0, 4.0, 5.0});
    CHECK_THAT(trapezoid(tight), WithinAbs(1.0, 1e-9));

    auto wide = ktune::kde({0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4});
    CHECK_THAT(trapezoid(wide), WithinAbs(1.0, 1e-9));
}

TEST_CASE("a symmetric sample yields a symmetric density") {
    auto estimate = ktune::kde({0.0, 1.0});
    for (size_t i = 0; i < 128; ++i) {
        CHECK_THAT(estimate.y[i], WithinAbs(estimate.y[255 - i], 1e-9));
    }
}

TEST_CASE("identical samples fall back to a fixed bump") {
    auto estimate = ktune::kde({3.0, 3.0, 3.0});
    CHECK(estimate.x.front() == 2.0);
    CHECK(estimate.x.back() == 4.0);
    CHECK(estimate.bandwidth == 0.25);
    CHECK_THAT(trapezoid(estimate), WithinAbs(1.0, 1e-9));
    // Peaked at the common value, decaying toward the edges.
    CHECK(estimate.y[127] > estimate.y[0]);
    CHECK(estimate.y[127] > estimate.y[255]);
}

TEST_CASE("one sample still produces a valid density") {
    auto estimate = ktune::kde({5.0});
    REQUIRE(estimate.x.size() == 256);
    CHECK(estimate.x.front() == 4.0);
    CHECK(estimate.x.back() == 6.0);
    CHECK_THAT(trapezoid(estimate), WithinAbs(1.0, 1e-9));
}

TEST_CASE("degenerate density requests are rejected") {
    CHECK_THROWS_AS(ktune::kde({}), ktune::Error);
    CHECK_THROWS_AS(ktune::kde({1.0, 2.0}, 1), ktune::Error);
}

TEST_CASE("experiment stats bundle the sample with its density") {
    auto stats = ktune::make_experiment_stats({2.0, 3.0, 2.5, 4.0});
    CHECK(stats.values.size() == 4);
    CHECK(stats.summary.count == 4);
    CHECK(stats.density.x.size() == 256);
    CHECK_THAT(trapezoid(stats.density), WithinAbs(1.0, 1e-9));
}

// =============================================================================
// CSV writing
// =============================================================================

TEST_CASE("csv fields are quoted exactly when RFC 4180 requires it") {
    CHECK(ktune::csv_field("plain") == "plain");
    CHECK(ktune::csv_field("") == "");
    CHECK(ktune::csv_field("a;b=1") == "a;b=1");
    CHECK(ktune::csv_field("a,b") == "\"a,b\"");
    CHECK(ktune::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(ktune::csv_field("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("results rows serialize in trace order with stable columns") {
    ktune::TuningOutcome outcome;
    ktune::TuningRow first;
    first.step = 1;
    first.config = ktune::Configuration{{"WPT", 1}};
    first.status = ktune::Status::success;
    first.time_ms = 2.5;
    first.sizes.global = {64, 8};
    first.sizes.local = {8, 8};
    first.verification = ktune::Verification::pass;
    first.best_so_far = 2.5;
    ktune::TuningRow second;
    second.step = 2;
    second.config = ktune::Configuration{{"WPT", 2}};
    second.status = ktune::Status::missing;
    second.sizes.global = {64};
    second.sizes.local = {8};
    outcome.rows = {first, second};

    std::ostringstream out;
    ktune::write_results_csv(out, outcome);
    CHECK(out.str()
          == "step,config,status,time_ms,global,local,best_so_far,verified\r\n"
             "1,WPT=1,ok,2.5,64x8,8x8,2.5,pass\r\n"
             "2,WPT=2,missing,,64,8,,\r\n");
}

TEST_CASE("run summaries serialize one row per run") {
    std::ostringstream out;
    ktune::write_runs_csv(out, {{0, 11, 2.5, "WPT=1"}, {1, 12, 3.0, "WPT=4"}});
    CHECK(out.str()
          == "run,seed,best_time_ms,best_config\r\n"
             "0,11,2.5,WPT=1\r\n"
             "1,12,3,WPT=4\r\n");
}

TEST_CASE("the stats layout is a summary block followed by the density") {
    auto stats = ktune::make_experiment_stats({1.0, 2.0});
    std::ostringstream out;
    ktune::write_stats_csv(out, stats);
    auto lines = lines_of(out.str());
    REQUIRE(lines.size() == 1 + 5 + 1 + 256);
    CHECK(lines[0] == "statistic,value");
    CHECK(lines[1] == "count,2");
    CHECK(lines[2] == "mean,1.5");
    CHECK(lines[3] == "std,0.7071067811865476");
    CHECK(lines[4] == "min,1");
    CHECK(lines[5] == "max,2");
    CHECK(lines[6] == "density_x,density_y");
    CHECK(lines[7].substr(0, 2) == "1,");
    CHECK(lines.back().substr(0, 2) == "2,");
}
