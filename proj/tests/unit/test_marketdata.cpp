#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../support/bars.hpp"
#include "../support/synth.hpp"
#include "perpsieve/error.hpp"

using namespace perpsieve;
using fixtures::from_closes;
using fixtures::kStart;

namespace {

std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "perpsieve_unit";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("validate_series on contiguous bars") {
    const BarSeries s = from_closes(fixtures::constant(100));
    const ValidationReport r = validate_series(s, 0);
    CHECK_FALSE(r.fatal);
    CHECK(r.n_gaps == 0);
    CHECK(r.n_bars == 100);
    CHECK(r.sanity_violations.empty());
}

TEST_CASE("one missing bar is fatal at tolerance 0") {
    BarSeries s = from_closes(fixtures::constant(10));
    const Timestamp missing = s.bars[4].ts;
    s.bars.erase(s.bars.begin() + 4);
    const ValidationReport r = validate_series(s, 0);
    CHECK(r.fatal);
    CHECK(r.n_gaps == 1);
    REQUIRE(r.gap_locations.size() == 1);
    CHECK(r.gap_locations[0] == missing);
    CHECK_FALSE(validate_series(s, 1).fatal);
    CHECK_THROWS_AS(require_valid(s), Error);
}

TEST_CASE("every missing slot is enumerated") {
    BarSeries s = from_closes(fixtures::constant(12));
    s.bars.erase(s.bars.begin() + 3, s.bars.begin() + 6);
    const ValidationReport r = validate_series(s, 0);
    CHECK(r.n_gaps == 3);
    CHECK(r.gap_locations.size() == 3);
}

TEST_CASE("high below close is one sanity violation") {
    BarSeries s = from_closes(fixtures::constant(10));
    s.bars[5].high = s.bars[5].close * 0.9995;  // still above low
    const ValidationReport r = validate_series(s, 0);
    CHECK(r.fatal);
    CHECK(r.sanity_violations.size() == 1);
    CHECK(r.sanity_violations[0].ts == s.bars[5].ts);
}

TEST_CASE("other sanity rules") {
    BarSeries base = from_closes(fixtures::constant(6));
    SUBCASE("negative volume") { base.bars[2].volume = -1.0; }
    SUBCASE("non-positive price") { base.bars[2].low = 0.0; }
    SUBCASE("duplicate timestamp") { base.bars[3].ts = base.bars[2].ts; }
    SUBCASE("off-grid spacing") { base.bars[3].ts += kMsPerHour; }
    SUBCASE("non-finite") { base.bars[1].close = std::nan(""); }
    CHECK(validate_series(base, 10).fatal);
}

TEST_CASE("validate_series is idempotent and does not mutate") {
    BarSeries s = from_closes(fixtures::constant(20));
    s.bars.erase(s.bars.begin() + 7);
    const BarSeries copy = s;
    const ValidationReport a = validate_series(s, 0);
    const ValidationReport b = validate_series(s, 0);
    CHECK(a.n_gaps == b.n_gaps);
    CHECK(a.gap_locations == b.gap_locations);
    CHECK(s.bars == copy.bars);
}

TEST_CASE("resample aggregates one 4h bar by hand") {
    BarSeries s;
    s.freq_hours = 1;
    const double o[] = {10, 11, 12, 13}, h[] = {12, 14, 13, 13}, l[] = {9, 10, 11, 12}, c[] = {11, 12, 12, 13},
                 v[] = {1, 2, 3, 4};
    for (int i = 0; i < 4; ++i) s.bars.push_back({kStart + i * kMsPerHour, o[i], h[i], l[i], c[i], v[i]});
    const BarSeries r = resample(s, 4);
    REQUIRE(r.size() == 1);
    CHECK(r.freq_hours == 4);
    CHECK(r.bars[0] == Bar{kStart, 10, 14, 9, 13, 10});
}

TEST_CASE("resample identity and trailing group") {
    const BarSeries s = from_closes({100, 101, 102, 103, 104}, 1);
    CHECK(resample(s, 1).bars == s.bars);
    const BarSeries r = resample(s, 4);
    REQUIRE(r.size() == 1);
    CHECK(r.bars[0].close == 103);
}

TEST_CASE("resample rejects non-multiples") {
    const BarSeries s = from_closes(fixtures::constant(8), 2);
    CHECK_THROWS_AS(resample(s, 3), Error);
    CHECK_THROWS_AS(resample(s, 0), Error);
}

TEST_CASE("groups align to UTC midnight") {
    // starts at 02:00, so the first 4h group (00:00-04:00) is incomplete
    const BarSeries s = from_closes(fixtures::constant(10), 1, kStart + 2 * kMsPerHour);
    const BarSeries r = resample(s, 4);
    REQUIRE(r.size() == 2);
    CHECK(r.bars[0].ts == kStart + 4 * kMsPerHour);
    CHECK(r.bars[1].ts == kStart + 8 * kMsPerHour);
}

TEST_CASE("resample composes: 1h->2h->4h equals 1h->4h") {
    perpsieve::Rng rng(5);
    const BarSeries s = fixtures::random_series(rng, 97);
    BarSeries hourly = s;
    hourly.freq_hours = 1;
    for (std::size_t i = 0; i < hourly.size(); ++i) hourly.bars[i].ts = kStart + static_cast<Timestamp>(i) * kMsPerHour;
    const BarSeries a = resample(resample(hourly, 2), 4);
    const BarSeries b = resample(hourly, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.bars[i].ts == b.bars[i].ts);
        CHECK(a.bars[i].open == b.bars[i].open);
        CHECK(a.bars[i].high == b.bars[i].high);
        CHECK(a.bars[i].low == b.bars[i].low);
        CHECK(a.bars[i].close == b.bars[i].close);
        // volume sums associate differently
        CHECK(a.bars[i].volume == doctest::Approx(b.bars[i].volume).epsilon(1e-12));
    }
}

TEST_CASE("align_funding carries forward from bar open") {
    const BarSeries s = from_closes(fixtures::constant(3), 4, kStart + 4 * kMsPerHour);  // 04:00, 08:00, 12:00
    const FundingSeries f{{{kStart + 8 * kMsPerHour, 0.0003}}, 0.0001};
    const std::vector<double> r = align_funding(f, s);
    CHECK(r == std::vector<double>{0.0001, 0.0003, 0.0003});
}

TEST_CASE("align_funding fallback and step function") {
    const BarSeries s = from_closes(fixtures::constant(8));
    CHECK(align_funding(FundingSeries{{}, 0.0002}, s) == std::vector<double>(8, 0.0002));
    const FundingSeries f{{{kStart, 0.001}, {kStart + 16 * kMsPerHour, -0.002}}, 0.0001};
    const std::vector<double> r = align_funding(f, s);
    for (int i = 0; i < 4; ++i) CHECK(r[i] == 0.001);
    for (int i = 4; i < 8; ++i) CHECK(r[i] == -0.002);
    // an observation between bar opens applies from the next open
    const FundingSeries g{{{kStart + 5 * kMsPerHour, 0.004}}, 0.0};
    CHECK(align_funding(g, s)[1] == 0.0);
    CHECK(align_funding(g, s)[2] == 0.004);
}

TEST_CASE("no backfill: changing funding at T leaves earlier bars untouched") {
    const BarSeries s = from_closes(fixtures::constant(60));
    perpsieve::Rng rng(3);
    FundingSeries f;
    for (int k = 0; k < 20; ++k) f.points.push_back({kStart + k * 8 * kMsPerHour, rng.uniform(-0.001, 0.001)});
    const std::vector<double> base = align_funding(f, s);
    for (std::size_t k = 0; k < f.points.size(); ++k) {
        FundingSeries g = f;
        g.points[k].rate += 0.01;
        const std::vector<double> alt = align_funding(g, s);
        for (std::size_t t = 0; t < s.size(); ++t) {
            if (s.bars[t].ts < f.points[k].ts) CHECK(alt[t] == base[t]);
        }
    }
}

TEST_CASE("align_funding rejects unordered funding") {
    const BarSeries s = from_closes(fixtures::constant(3));
    const FundingSeries f{{{kStart + 8 * kMsPerHour, 0.1}, {kStart, 0.2}}, 0.0};
    CHECK_THROWS_AS(align_funding(f, s), Error);
}

TEST_CASE("market_returns") {
    CHECK(market_returns(from_closes(fixtures::constant(5))) == std::vector<double>(4, 0.0));
    const auto up = market_returns(from_closes({100, 110}));
    REQUIRE(up.size() == 1);
    CHECK(up[0] == doctest::Approx(0.10).epsilon(1e-15));
    CHECK(market_returns(from_closes({100, 80}))[0] == doctest::Approx(-0.20).epsilon(1e-15));
}

TEST_CASE("window_range is half-open") {
    const BarSeries s = from_closes(fixtures::constant(10));
    const WindowSpec w{"w", s.bars[2].ts, s.bars[5].ts};
    const IndexRange r = window_range(s, w);
    CHECK(r.first == 2);
    CHECK(r.last == 5);
    const WindowSpec next{"n", s.bars[5].ts, s.bars[8].ts};
    CHECK(window_range(s, next).first == r.last);
}

TEST_CASE("synthetic_funding on constant prices is the base rate") {
    const BarSeries s = from_closes(fixtures::constant(300));
    const FundingSeries f = synthetic_funding(s);
    REQUIRE_FALSE(f.points.empty());
    for (const auto& p : f.points) CHECK(p.rate == f.fallback_rate);
    CHECK(f.fallback_rate == 0.0001);
    for (std::size_t i = 1; i < f.points.size(); ++i) CHECK(f.points[i].ts - f.points[i - 1].ts == 8 * kMsPerHour);
}

TEST_CASE("synthetic_funding is deterministic and clamped") {
    const BarSeries s = from_closes(fixtures::ramp(50, 400, 0.01));
    SyntheticFundingSettings cfg;
    cfg.clamp = 0.0005;
    cfg.sensitivity = 0.01;
    const FundingSeries a = synthetic_funding(s, cfg);
    const FundingSeries b = synthetic_funding(s, cfg);
    CHECK(a.points == b.points);
    bool hit_clamp = false;
    for (const auto& p : a.points) {
        CHECK(std::abs(p.rate) <= cfg.clamp);
        hit_clamp = hit_clamp || p.rate == cfg.clamp;
    }
    CHECK(hit_clamp);
}

TEST_CASE("synthetic_funding ignores future bars") {
    const BarSeries full = fixtures::random_run(17, 600).series;
    const FundingSeries f_full = synthetic_funding(full);
    BarSeries cut = full;
    cut.bars.resize(400);
    const FundingSeries f_cut = synthetic_funding(cut);
    for (const auto& p : f_cut.points) {
        const auto it = std::find_if(f_full.points.begin(), f_full.points.end(),
                                     [&](const FundingPoint& q) { return q.ts == p.ts; });
        REQUIRE(it != f_full.points.end());
        CHECK(it->rate == p.rate);
    }
}

TEST_CASE("bar CSV round trip, epoch and ISO timestamps") {
    const BarSeries s = fixtures::random_run(4, 50).series;
    const std::string path = temp_path("bars.csv");
    write_bars_csv(s, path);
    const BarSeries back = read_bars_csv(path, 4);
    CHECK(back.bars == s.bars);

    const std::string iso = temp_path("bars_iso.csv");
    write_text(iso,
               "# comment\ntimestamp,open,high,low,close,volume\n"
               "2020-01-01T00:00:00Z,1,2,0.5,1.5,10\n2020-01-01T04:00:00Z,1.5,2,1,1.2,3\n");
    const BarSeries b = read_bars_csv(iso, 4);
    REQUIRE(b.size() == 2);
    CHECK(b.bars[0].ts == kStart);
    CHECK(b.bars[1].ts == kStart + 4 * kMsPerHour);
}

TEST_CASE("bar CSV rejects mixed timestamps and bad headers") {
    const std::string mixed = temp_path("mixed.csv");
    write_text(mixed, "timestamp,open,high,low,close,volume\n2020-01-01T00:00:00Z,1,2,0.5,1.5,10\n1577851200000,1.5,2,1,1.2,3\n");
    CHECK_THROWS_AS(read_bars_csv(mixed, 4), Error);
    const std::string header = temp_path("header.csv");
    write_text(header, "ts,o,h,l,c,v\n");
    CHECK_THROWS_AS(read_bars_csv(header, 4), Error);
    CHECK_THROWS_AS(read_bars_csv(temp_path("does_not_exist.csv"), 4), Error);
}

TEST_CASE("funding CSV round trip and ordering") {
    const FundingSeries f{{{kStart, 0.0001}, {kStart + 8 * kMsPerHour, -0.00025}}, 0.0001};
    const std::string path = temp_path("funding.csv");
    write_funding_csv(f, path);
    const FundingSeries back = read_funding_csv(path, 0.0001);
    CHECK(back.points == f.points);
    const std::string bad = temp_path("funding_bad.csv");
    write_text(bad, "timestamp,funding_rate_8h\n1577865600000,0.1\n1577836800000,0.1\n");
    CHECK_THROWS_AS(read_funding_csv(bad, 0.0001), Error);
}

TEST_CASE("synthetic bars validate") {
    SyntheticBarSettings cfg;
    cfg.n_bars = 500;
    const BarSeries s = synthetic_bars(cfg);
    CHECK(s.size() == 500);
    CHECK_FALSE(validate_series(s).fatal);
    CHECK(synthetic_bars(cfg).bars == s.bars);
}
