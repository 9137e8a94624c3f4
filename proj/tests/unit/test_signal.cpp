#include <doctest.h>

#include <cmath>

#include "../support/bars.hpp"
#include "../support/synth.hpp"
#include "perpsieve/error.hpp"

using namespace perpsieve;
using fixtures::from_closes;

namespace {

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

// Independent EMA with the same seeding convention.
std::vector<double> ema_oracle(const std::vector<double>& x, int span) {
    std::vector<double> out;
    const double a = 2.0 / (span + 1.0);
    double e = x.front();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i > 0) e = a * x[i] + (1 - a) * e;
        out.push_back(e);
    }
    return out;
}

std::size_t long_entries(const std::vector<std::int8_t>& s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 1 && (i == 0 || s[i - 1] != 1)) ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("momentum score") {
    CHECK(momentum_score(100, 100, 0.01) == 0.5);
    CHECK(momentum_score(1e6, 100, 0.01) == doctest::Approx(1.0));
    CHECK(momentum_score(101, 100, 0.01) == doctest::Approx(0.5 * (1 + std::tanh(1.0))).epsilon(1e-14));
    CHECK(momentum_score(101, 100, 0.01) == doctest::Approx(0.88080).epsilon(1e-5));
}

TEST_CASE("anomaly score") {
    CHECK(anomaly_score(0.0, 2.0) == 0.5);
    CHECK(anomaly_score(1e6, 2.0) == doctest::Approx(0.0));
    CHECK(anomaly_score(-2.0, 2.0) == doctest::Approx(0.88080).epsilon(1e-5));
}

TEST_CASE("composite score") {
    CHECK(composite_score(0.3, 0.9, 1.0) == 0.3);
    CHECK(composite_score(0.3, 0.9, 0.0) == 0.9);
    CHECK(composite_score(0.8, 0.5, 0.6) == doctest::Approx(0.68).epsilon(1e-14));
}

TEST_CASE("funding-biased thresholds") {
    StrategyParams p;
    const double base = base_threshold(p);
    CHECK(base == doctest::Approx(0.5 * (1 + std::tanh(0.003 / 0.01))));
    SUBCASE("kappa zero disables the channel") {
        p.funding_bias_k_thr_per_bps = 0.0;
        for (double fr : {-0.01, -0.0001, 0.0, 0.0002, 0.01}) {
            const Thresholds t = effective_thresholds(fr, p);
            CHECK(t.tau_long == base);
            CHECK(t.tau_short == base);
        }
    }
    SUBCASE("at the dead-band edge the increment is zero") {
        p.funding_bias_thr_bps = 5;
        p.funding_bias_k_thr_per_bps = 0.005;
        CHECK(effective_thresholds(0.0005, p).tau_long == base);
    }
    SUBCASE("unit conversion") {
        p.funding_bias_thr_bps = 5;
        p.funding_bias_k_thr_per_bps = 0.005;
        const Thresholds t = effective_thresholds(0.0007, p);
        CHECK(t.tau_long - base == doctest::Approx(0.01).epsilon(1e-9));
        CHECK(t.tau_short == base);
        const Thresholds s = effective_thresholds(-0.0007, p);
        CHECK(s.tau_short - base == doctest::Approx(0.01).epsilon(1e-9));
        CHECK(s.tau_long == base);
    }
    SUBCASE("capped at one") {
        p.funding_bias_k_thr_per_bps = 0.005;
        CHECK(effective_thresholds(0.5, p).tau_long == 1.0);
    }
}

TEST_CASE("scores and thresholds stay in range") {
    perpsieve::Rng rng(21);
    for (int i = 0; i < 2000; ++i) {
        const StrategyParams p = fixtures::random_params(rng);
        const double m = momentum_score(rng.uniform(50, 150), rng.uniform(50, 150), p.theta_momentum);
        const double a = anomaly_score(rng.uniform(-10, 10), p.bb_dev);
        const double c = composite_score(m, a, p.w_mom);
        CHECK((m >= 0 && m <= 1 && a >= 0 && a <= 1 && c >= 0 && c <= 1));
        const Thresholds t = effective_thresholds(rng.uniform(-0.01, 0.01), p);
        const double base = base_threshold(p);
        CHECK((t.tau_long >= base && t.tau_long <= 1 && t.tau_short >= base && t.tau_short <= 1));
    }
}

TEST_CASE("indicators match independent oracles") {
    const BarSeries s = fixtures::random_run(31, 120).series;
    StrategyParams p;
    p.atr_period = 14;
    const auto ind = compute_indicators(s, p);
    std::vector<double> closes;
    for (const auto& b : s.bars) closes.push_back(b.close);
    const auto fast = ema_oracle(closes, p.ema_fast);
    const auto slow = ema_oracle(closes, p.ema_slow);
    for (std::size_t t = 0; t < s.size(); ++t) {
        CHECK(ind[t].ema_fast_val == doctest::Approx(fast[t]).epsilon(1e-12));
        CHECK(ind[t].ema_slow_val == doctest::Approx(slow[t]).epsilon(1e-12));
        CHECK(ind[t].ready == (t + 1 >= 26));
    }
    const std::size_t t = 80;
    double mean = 0;
    for (std::size_t k = t - 19; k <= t; ++k) mean += closes[k] / 20.0;
    double var = 0;
    for (std::size_t k = t - 19; k <= t; ++k) var += (closes[k] - mean) * (closes[k] - mean) / 20.0;
    CHECK(ind[t].bb_z == doctest::Approx((closes[t] - mean) / std::sqrt(var)).epsilon(1e-9));
    double atr = 0;
    for (std::size_t k = t - 13; k <= t; ++k) {
        const Bar& b = s.bars[k];
        atr += std::max({b.high - b.low, std::abs(b.high - closes[k - 1]), std::abs(b.low - closes[k - 1])}) / 14.0;
    }
    CHECK(ind[t].atr_val == doctest::Approx(atr).epsilon(1e-12));
}

TEST_CASE("constant prices give no signal") {
    const BarSeries s = from_closes(fixtures::constant(200));
    const auto sig = generate_signals(s, zeros(200), StrategyParams{});
    for (auto v : sig) CHECK(v == 0);
}

TEST_CASE("uptrend goes long at the EMA crossing and stays long") {
    const BarSeries s = from_closes(fixtures::ramp(60, 200, 0.004));
    StrategyParams p;
    p.ema_threshold = 0.0005;
    p.min_hold_bars = 3;
    p.w_mom = 1.0;
    std::vector<double> closes;
    for (const auto& b : s.bars) closes.push_back(b.close);
    const auto fast = ema_oracle(closes, p.ema_fast);
    const auto slow = ema_oracle(closes, p.ema_slow);
    std::size_t cross = p.warmup_bars() - 1;
    while (cross < closes.size() && (fast[cross] - slow[cross]) / slow[cross] < p.ema_threshold) ++cross;
    REQUIRE(cross < closes.size());
    const auto sig = generate_signals(s, zeros(s.size()), p);
    for (std::size_t t = 0; t < cross; ++t) CHECK(sig[t] == 0);
    for (std::size_t t = cross; t < sig.size(); ++t) CHECK(sig[t] == 1);

    // with the anomaly channel mixed in, the long state is still absorbing once reached
    p.w_mom = 0.7;
    const auto mixed = generate_signals(s, zeros(s.size()), p);
    std::size_t first = 0;
    while (first < mixed.size() && mixed[first] != 1) ++first;
    REQUIRE(first < mixed.size());
    for (std::size_t t = first; t < mixed.size(); ++t) CHECK(mixed[t] == 1);
}

TEST_CASE("warm-up bars emit zero") {
    const BarSeries s = fixtures::random_run(41, 300).series;
    StrategyParams p;
    p.ema_slow = 60;
    p.atr_period = 30;
    p.ema_threshold = 0.0005;
    const auto sig = generate_signals(s, zeros(s.size()), p);
    for (std::size_t t = 0; t + 1 < p.warmup_bars(); ++t) CHECK(sig[t] == 0);
}

TEST_CASE("gate toggle is inert at zero funding") {
    perpsieve::Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        const fixtures::Run run = fixtures::random_run(100 + i, 400);
        StrategyParams on = run.params;
        on.funding_gates_enabled = true;
        StrategyParams off = run.params;
        off.funding_gates_enabled = false;
        CHECK(generate_signals(run.series, zeros(400), on) == generate_signals(run.series, zeros(400), off));
    }
}

TEST_CASE("signals are causal") {
    for (int i = 0; i < 20; ++i) {
        const fixtures::Run run = fixtures::random_run(200 + i, 500);
        std::vector<double> fr = align_funding(run.funding, run.series);
        const auto base = generate_signals(run.series, fr, run.params);
        const std::size_t T = 100 + static_cast<std::size_t>(i) * 17;
        BarSeries s = run.series;
        for (std::size_t k = T + 1; k < s.size(); ++k) {
            s.bars[k].close *= 1.3;
            s.bars[k].high *= 1.3;
            s.bars[k].open *= 1.3;
            s.bars[k].low *= 1.3;
        }
        std::vector<double> fr2 = fr;
        for (std::size_t k = T + 1; k < fr2.size(); ++k) fr2[k] = 0.004;
        const auto alt = generate_signals(s, fr2, run.params);
        for (std::size_t t = 0; t <= T; ++t) CHECK(alt[t] == base[t]);
    }
}

TEST_CASE("raising kappa never adds long entries under positive funding") {
    // Holds with any single risk control active; min hold, cooldown and ATR exits combined make
    // the state path-dependent enough to break it on rare paths.
    for (int i = 0; i < 200; ++i) {
        const fixtures::Run run = fixtures::random_run(300 + i, 600);
        for (int keep = 0; keep < 4; ++keep) {
            StrategyParams p = run.params;
            p.funding_gates_enabled = true;
            p.funding_bias_thr_bps = 1.0;
            if (keep != 1) p.min_hold_bars = 1;
            if (keep != 2) p.cooldown_hours = 0;
            if (keep != 3) p.atr_period = 0;
            const std::vector<double> fr(600, 0.0008);
            std::size_t prev = SIZE_MAX;
            for (double k : {0.0, 0.0005, 0.001, 0.003, 0.005}) {
                p.funding_bias_k_thr_per_bps = k;
                const std::size_t n = long_entries(generate_signals(run.series, fr, p));
                CHECK(n <= prev);
                prev = n;
            }
        }
    }
}

TEST_CASE("min hold keeps runs at least k bars") {
    for (int i = 0; i < 40; ++i) {
        const fixtures::Run run = fixtures::random_run(400 + i, 600);
        StrategyParams p = run.params;
        p.atr_period = 0;
        const auto sig = generate_signals(run.series, align_funding(run.funding, run.series), p);
        std::size_t t = 0;
        while (t < sig.size()) {
            if (sig[t] == 0) {
                ++t;
                continue;
            }
            std::size_t end = t;
            while (end < sig.size() && sig[end] == sig[t]) ++end;
            if (end < sig.size()) CHECK(end - t >= static_cast<std::size_t>(p.min_hold_bars));
            t = end;
        }
    }
}

TEST_CASE("cooldown blocks re-entry after an exit") {
    for (int i = 0; i < 40; ++i) {
        const fixtures::Run run = fixtures::random_run(500 + i, 600);
        StrategyParams p = run.params;
        p.cooldown_hours = 8;
        const auto sig = generate_signals(run.series, align_funding(run.funding, run.series), p);
        // with 4h bars an 8h cooldown forbids a new position at the next bar after an exit
        for (std::size_t t = 1; t + 1 < sig.size(); ++t) {
            if (sig[t - 1] != 0 && sig[t] != sig[t - 1]) CHECK(sig[t] == 0);
            if (sig[t - 1] != 0 && sig[t] == 0) CHECK(sig[t + 1] == 0);
        }
    }
}

TEST_CASE("ATR stop overrides min hold") {
    std::vector<double> c = fixtures::ramp(40, 120, 0.004);
    StrategyParams p;
    p.ema_threshold = 0.0005;
    p.w_mom = 1.0;
    p.atr_period = 14;
    p.atr_k_sl = 1.0;
    p.min_hold_bars = 6;
    const auto sig0 = generate_signals(from_closes(c), zeros(c.size()), p);
    std::size_t e = 0;
    while (e < sig0.size() && sig0[e] != 1) ++e;
    REQUIRE(e + 1 < c.size());
    c.resize(e + 1);
    c.push_back(c.back() * 0.95);
    c.push_back(c.back());
    const BarSeries s = from_closes(c);
    const auto with_stop = generate_signals(s, zeros(c.size()), p);
    const auto ind = compute_indicators(s, p);
    REQUIRE(c[e] - c[e + 1] > ind[e + 1].atr_val);
    CHECK(with_stop[e] == 1);
    CHECK(with_stop[e + 1] == 0);
    p.atr_k_sl = 0.0;
    CHECK(generate_signals(s, zeros(c.size()), p)[e + 1] == 1);
}

TEST_CASE("take profit exits a favourable move") {
    std::vector<double> c = fixtures::ramp(40, 120, 0.004);
    StrategyParams p;
    p.ema_threshold = 0.0005;
    p.w_mom = 1.0;
    p.atr_period = 14;
    p.atr_k_tp = 2.0;
    const auto sig = generate_signals(from_closes(c), zeros(c.size()), p);
    const auto ind = compute_indicators(from_closes(c), p);
    std::size_t e = 0;
    while (e < sig.size() && sig[e] != 1) ++e;
    REQUIRE(e < sig.size());
    std::size_t x = e + 1;
    while (x < c.size() && c[x] - c[e] <= 2.0 * ind[x].atr_val) ++x;
    REQUIRE(x < c.size());
    for (std::size_t t = e; t < x; ++t) CHECK(sig[t] == 1);
    CHECK(sig[x] == 0);
    // no re-entry in the same direction until the raw signal leaves it
    for (std::size_t t = x; t < sig.size(); ++t) CHECK(sig[t] == 0);
}

TEST_CASE("params validation") {
    StrategyParams p;
    CHECK_NOTHROW(p.validate());
    p.ema_fast = 30;
    p.ema_slow = 30;
    CHECK_THROWS_AS(p.validate(), Error);
    StrategyParams q;
    q.bb_dev = 3.0;
    CHECK_THROWS_AS(q.validate(), Error);
    StrategyParams r;
    r.funding_bias_k_thr_per_bps = 0.01;
    CHECK_THROWS_AS(r.validate(), Error);
    CHECK_THROWS_AS(generate_signals(from_closes(fixtures::constant(5)), zeros(4), StrategyParams{}), Error);
}
