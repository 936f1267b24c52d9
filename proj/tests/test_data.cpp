#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "levycast/data.hpp"
#include "levycast/rng.hpp"
#include "levycast/stable.hpp"

using levycast::RngStream;
using levycast::Split;
using levycast::StableParams;

namespace {

std::string write_temp(const char* name, const std::string& body) {
    const std::string path = std::string("/tmp/levycast_data_") + name;
    std::ofstream(path) << body;
    return path;
}

}  // namespace

TEST_CASE("standardization centers, scales, and inverts exactly") {
    const std::vector<double> series = {0.0, 2.0};
    const auto [z, sc] = levycast::standardize(series);
    CHECK(sc.center == Catch::Approx(1.0));
    CHECK(sc.spread == Catch::Approx(1.0));  // population std of {0, 2}
    CHECK(z[0] == Catch::Approx(-1.0));
    CHECK(z[1] == Catch::Approx(1.0));

    RngStream rng(3, 0);
    std::vector<double> raw(500);
    for (auto& v : raw) v = 5.0 + 3.0 * rng.normal();
    const auto [zz, sz] = levycast::standardize(raw);
    for (std::size_t i = 0; i < raw.size(); ++i)
        CHECK(sz.invert(zz[i]) == Catch::Approx(raw[i]).margin(1e-12));
    const auto refit = levycast::standardize(zz).second;
    CHECK(refit.center == Catch::Approx(0.0).margin(1e-12));
    CHECK(refit.spread == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("standardization refuses a constant series") {
    CHECK_THROWS_AS(levycast::standardize(std::vector<double>(10, 4.2)),
                    std::invalid_argument);
}

TEST_CASE("tail index estimator on a worked example") {
    // magnitudes e^2, e, 1: mean log spacing over the top 2 is 3/2.
    const std::vector<double> s = {std::exp(2.0), std::exp(1.0), 1.0};
    CHECK(levycast::hill_estimate(s, 2) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    // sign-insensitive by default
    const std::vector<double> neg = {-std::exp(2.0), std::exp(1.0), -1.0};
    CHECK(levycast::hill_estimate(neg, 2) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("tail index estimator rejects degenerate inputs") {
    CHECK_THROWS_WITH(levycast::hill_estimate({1.0, 1.0, 1.0}, 2),
                      Catch::Matchers::ContainsSubstring("degenerate tail"));
    CHECK_THROWS_AS(levycast::hill_estimate({1.0, 2.0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(levycast::hill_estimate({1.0, 2.0, 3.0}, 0), std::invalid_argument);
}

TEST_CASE("tail index estimator recovers a Pareto exponent") {
    RngStream rng(11, 0);
    std::vector<double> x(100000);
    for (auto& v : x) v = std::pow(rng.uniform(), -1.0 / 1.5);  // Pareto(1.5)
    CHECK(levycast::hill_estimate(x, 1000) == Catch::Approx(1.5).margin(0.1));
}

TEST_CASE("default order-statistic count is ceil(N^0.6)") {
    CHECK(levycast::hill_default_k(100000) == 1000);
    CHECK(levycast::hill_default_k(100) == 16);
}

TEST_CASE("synthetic generation is deterministic and respects the schedule") {
    const std::vector<levycast::RegimeSegment> schedule = {
        {{1.8, 0.0, 1.0, 0.0}, 300}, {{1.2, 0.0, 1.0, 0.0}, 200}};
    const auto a = levycast::generate_synthetic(schedule, 5);
    const auto b = levycast::generate_synthetic(schedule, 5);
    const auto c = levycast::generate_synthetic(schedule, 6);
    REQUIRE(a.size() == 500);
    CHECK(a == b);
    CHECK(a != c);
    for (double v : a) CHECK(std::isfinite(v));
}

TEST_CASE("generated gaussian data has normal kurtosis and passes the fit test") {
    const auto x = levycast::generate_synthetic(StableParams{2.0, 0.0, 1.0, 0.0}, 100000, 2);
    CHECK(levycast::kurtosis(x) == Catch::Approx(3.0).margin(0.1));
    CHECK(levycast::ks_gaussian(x).second > 0.01);
}

TEST_CASE("generated heavy-tailed data is flagged by every diagnostic") {
    const auto x = levycast::generate_synthetic(StableParams{1.2, 0.0, 1.0, 0.0}, 100000, 3);
    CHECK(levycast::hill_estimate(x, levycast::hill_default_k(x.size())) ==
          Catch::Approx(1.2).margin(0.15));
    CHECK(levycast::kurtosis(x) > 10.0);
    CHECK(levycast::ks_gaussian(x).second < 1e-3);

    const auto d = levycast::tail_diagnostics(x);
    CHECK(d.hill_alpha == Catch::Approx(1.2).margin(0.15));
    CHECK(d.begin == 0);
    CHECK(d.end == x.size());
}

TEST_CASE("diagnostic windows below fifty points are refused") {
    const std::vector<double> x(49, 1.0);
    CHECK_THROWS_AS(levycast::tail_diagnostics(x), std::invalid_argument);
    CHECK_THROWS_AS(levycast::rolling_tail_diagnostics(x, 49), std::invalid_argument);
}

TEST_CASE("rolling diagnostics tile the series without overlap") {
    const auto x = levycast::generate_synthetic(StableParams{1.8, 0.0, 1.0, 0.0}, 1050, 4);
    const auto rows = levycast::rolling_tail_diagnostics(x, 500);
    REQUIRE(rows.size() == 2);  // trailing 50 points dropped
    CHECK(rows[0].begin == 0);
    CHECK(rows[0].end == 500);
    CHECK(rows[1].begin == 500);
    CHECK(rows[1].end == 1000);
}

TEST_CASE("volatility buckets follow the local tail index") {
    const std::vector<levycast::RegimeSegment> schedule = {
        {{1.8, 0.0, 1.0, 0.0}, 2000}, {{0.8, 0.0, 1.0, 0.0}, 2000}};
    const auto x = levycast::generate_synthetic(schedule, 9);
    const auto buckets = levycast::bucket_by_hill(x, 2000);
    REQUIRE(buckets.size() == 2);
    CHECK(buckets[0] == levycast::VolRegime::low);
    CHECK(buckets[1] == levycast::VolRegime::high);
    CHECK_THROWS_AS(levycast::bucket_by_hill(x, 2000, levycast::HillThresholds{1.0, 1.5}),
                    std::invalid_argument);
}

TEST_CASE("csv ingestion reads the named column") {
    const auto path = write_temp("ok.csv", "date,price\n2024-01-01,1.5\n2024-01-02,2.5\n2024-01-03,4.0\n");
    CHECK(levycast::ingest_csv(path, "price") == std::vector<double>{1.5, 2.5, 4.0});
    CHECK_THROWS_WITH(levycast::ingest_csv(path, "volume"),
                      Catch::Matchers::ContainsSubstring("no column named 'volume'"));
    std::remove(path.c_str());
}

TEST_CASE("csv ingestion reports every offending line at once") {
    const auto path = write_temp("bad.csv", "v\n1.0\n\n,\nx2\n3.0\nnan\n");
    CHECK_THROWS_WITH(levycast::ingest_csv(path, "v"),
                      Catch::Matchers::ContainsSubstring("line 4 ('')") &&
                          Catch::Matchers::ContainsSubstring("line 5 ('x2')") &&
                          Catch::Matchers::ContainsSubstring("line 7 ('nan')"));
    std::remove(path.c_str());
}

TEST_CASE("csv ingestion can convert prices to log returns") {
    const auto path = write_temp("prices.csv",
                                 "p\n1.0\n2.718281828459045\n7.389056098930650\n");
    const auto r = levycast::ingest_csv(path, "p", true);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(r[1] == Catch::Approx(1.0).epsilon(1e-9));
    std::remove(path.c_str());

    const auto neg = write_temp("neg.csv", "p\n1.0\n-2.0\n");
    CHECK_THROWS_WITH(levycast::ingest_csv(neg, "p", true),
                      Catch::Matchers::ContainsSubstring("nonpositive price"));
    std::remove(neg.c_str());
}

TEST_CASE("csv ingestion rejects empty inputs") {
    const auto empty = write_temp("empty.csv", "");
    CHECK_THROWS_WITH(levycast::ingest_csv(empty, "v"),
                      Catch::Matchers::ContainsSubstring("empty file"));
    std::remove(empty.c_str());
    const auto headers_only = write_temp("h.csv", "v\n");
    CHECK_THROWS_WITH(levycast::ingest_csv(headers_only, "v"),
                      Catch::Matchers::ContainsSubstring("no data rows"));
    std::remove(headers_only.c_str());
}

TEST_CASE("window construction counts and shapes") {
    std::vector<double> series(8);
    for (std::size_t i = 0; i < series.size(); ++i) series[i] = static_cast<double>(i % 3) - 1.0;
    levycast::SplitFractions all_train{1.0, 0.0};

    const auto one = levycast::make_windows(series, 6, 2, 1, all_train);
    REQUIRE(one.windows.size() == 1);
    CHECK(one.windows[0].context.size() == 6);
    CHECK(one.windows[0].targets.size() == 2);
    CHECK(one.starts[0] == 0);

    std::vector<double> longer(10);
    for (std::size_t i = 0; i < longer.size(); ++i) longer[i] = static_cast<double>(i % 4);
    CHECK(levycast::make_windows(longer, 6, 2, 1, all_train).windows.size() == 3);
    CHECK(levycast::make_windows(longer, 6, 2, 2, all_train).windows.size() == 2);

    CHECK_THROWS_AS(levycast::make_windows({1.0, 2.0}, 6, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(levycast::make_windows(series, 0, 2, 1), std::invalid_argument);
}

TEST_CASE("chronological splits happen before windowing, so no window crosses") {
    const auto x = levycast::generate_synthetic(StableParams{1.6, 0.0, 1.0, 0.0}, 100, 8);
    const int T = 10, H = 5;
    const auto ds = levycast::make_windows(x, T, H, 1, levycast::SplitFractions{0.7, 0.15});
    const std::size_t bounds[4] = {0, 70, 85, 100};
    REQUIRE_FALSE(ds.windows.empty());
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        const auto s = static_cast<std::size_t>(ds.splits[i]);
        ++counts[s];
        CHECK(ds.starts[i] >= bounds[s]);
        CHECK(ds.starts[i] + T + H <= bounds[s + 1]);
    }
    CHECK(counts[0] == 56);  // starts 0..55
    CHECK(counts[1] == 1);   // start 70
    CHECK(counts[2] == 1);   // start 85
}

TEST_CASE("the scaler is fit on the training segment only") {
    std::vector<double> x(100);
    RngStream rng(13, 0);
    for (std::size_t i = 0; i < 70; ++i) x[i] = rng.normal();
    for (std::size_t i = 70; i < 100; ++i) x[i] = 1000.0 + rng.normal();
    const auto ds = levycast::make_windows(x, 10, 5, 1, levycast::SplitFractions{0.7, 0.15});
    const auto train_only = levycast::standardize(std::vector<double>(x.begin(), x.begin() + 70));
    CHECK(ds.scaler.center == train_only.second.center);
    CHECK(ds.scaler.spread == train_only.second.spread);
    CHECK(std::fabs(ds.scaler.center) < 1.0);  // untouched by the shifted tail segment

    // Window values are the standardized series at the window's offsets.
    const auto z = levycast::standardize(x, ds.scaler);
    for (std::size_t i = 0; i < ds.windows.size(); ++i)
        for (int j = 0; j < 10; ++j)
            CHECK(ds.windows[i].context[static_cast<std::size_t>(j)] ==
                  z[ds.starts[i] + static_cast<std::size_t>(j)]);
}

TEST_CASE("split fractions that starve every segment are rejected") {
    // 12 points: train 8, val 2, test 2; no segment fits T+H = 10.
    std::vector<double> x(12);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 5);
    CHECK_THROWS_WITH(levycast::make_windows(x, 8, 2, 1, levycast::SplitFractions{0.66, 0.17}),
                      Catch::Matchers::ContainsSubstring("no split segment"));
}
