#include <doctest.h>

#include <algorithm>

#include "../support/bars.hpp"
#include "../support/synth.hpp"
#include "perpsieve/audit.hpp"
#include "perpsieve/error.hpp"

using namespace perpsieve;

namespace {

ReplayInputs inputs_for(const fixtures::Run& run) {
    ReplayInputs in;
    in.series = &run.series;
    in.funding = &run.funding;
    in.params = run.params;
    in.profile = run.profile;
    in.window = full_window(run.series);
    return in;
}

std::vector<GuardInputRow> stream(std::size_t n, double r, double exposure = 1.0,
                                  Timestamp start = fixtures::kStart) {
    std::vector<GuardInputRow> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({start + static_cast<Timestamp>(i) * 4 * kMsPerHour, r, exposure});
    return rows;
}

GuardConfig dd_config(KillMode mode) {
    GuardConfig c;
    c.watch.max_drawdown = 0.10;
    c.kill.max_drawdown = 0.20;
    c.kill_mode = mode;
    c.temporary_kill_bars = 3;
    c.bars_30d = 6;
    c.bars_90d = 18;
    return c;
}

}  // namespace

TEST_CASE("same-engine replay passes with zero tolerance") {
    for (std::uint64_t i = 0; i < 20; ++i) {
        const fixtures::Run run = fixtures::random_run(1500 + i, 400);
        const BacktestResult r = run_backtest(run.series, run.funding, run.params, run.profile, full_window(run.series));
        const AuditReport a = replay_and_audit(inputs_for(run), r.ledger, 0.0);
        CHECK(a.pass);
        CHECK(a.n_bars == 400);
        CHECK(a.max_abs_signal_diff == 0.0);
        CHECK(a.max_abs_exposure_diff == 0.0);
        CHECK(a.trades_diff == 0.0);
        CHECK(a.fees_diff == 0.0);
        CHECK(a.slip_diff == 0.0);
        CHECK(a.fund_diff == 0.0);
    }
}

TEST_CASE("an injected exposure fault is measured and judged by tolerance") {
    const fixtures::Run run = fixtures::random_run(1600, 400);
    const BacktestResult r = run_backtest(run.series, run.funding, run.params, run.profile, full_window(run.series));
    std::vector<LedgerRow> ref = r.ledger;
    ref[123].exposure += 0.1;
    const AuditReport tight = replay_and_audit(inputs_for(run), ref, 1e-9);
    CHECK(tight.max_abs_exposure_diff == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_FALSE(tight.pass);
    CHECK(replay_and_audit(inputs_for(run), ref, 0.2).pass);
}

TEST_CASE("component diffs are reference minus replay") {
    const fixtures::Run run = fixtures::random_run(1601, 300);
    const BacktestResult r = run_backtest(run.series, run.funding, run.params, run.profile, full_window(run.series));
    std::vector<LedgerRow> ref = r.ledger;
    ref[10].c_fee += 0.001;
    ref[20].c_fund -= 0.002;
    ref[30].c_slip += 0.0005;
    const AuditReport a = audit_ledgers(ref, r.ledger);
    CHECK(a.fees_diff == doctest::Approx(0.001).epsilon(1e-9));
    CHECK(a.fund_diff == doctest::Approx(-0.002).epsilon(1e-9));
    CHECK(a.slip_diff == doctest::Approx(0.0005).epsilon(1e-9));
    CHECK_FALSE(a.pass);
}

TEST_CASE("schema mismatches and missing inputs are rejected") {
    const fixtures::Run run = fixtures::random_run(1602, 200);
    const BacktestResult r = run_backtest(run.series, run.funding, run.params, run.profile, full_window(run.series));
    std::vector<LedgerRow> shorter(r.ledger.begin(), r.ledger.end() - 1);
    try {
        audit_ledgers(r.ledger, shorter);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Schema);
    }
    std::vector<LedgerRow> shifted = r.ledger;
    shifted[5].ts += 1;
    CHECK_THROWS_AS(audit_ledgers(r.ledger, shifted), Error);
    ReplayInputs in = inputs_for(run);
    in.series = nullptr;
    CHECK_THROWS_AS(replay_and_audit(in, r.ledger), Error);
}

TEST_CASE("audit report JSON carries the ledger column names") {
    AuditReport a;
    a.pass = true;
    const std::string j = audit_report_json(a, "rid");
    for (const char* key : {"max_abs_signal_diff", "max_abs_exposure_diff", "trades_diff", "fees_diff", "slip_diff",
                            "fund_diff", "pass", "tolerance", "n_bars", "run_id"}) {
        CHECK(j.find(key) != std::string::npos);
    }
}

TEST_CASE("guard on a flat stream stays ok") {
    GuardConfig c = dd_config(KillMode::Persistent);
    c.watch.min_ann_return_30d = -0.5;
    c.kill.min_ann_return_30d = -0.9;
    c.watch.max_daily_loss = 0.05;
    c.kill.max_daily_loss = 0.10;
    const auto [state, steps] = guard_step(GuardState{}, stream(500, 0.0, 0.0), c);
    for (const auto& s : steps) {
        CHECK(s.decision == GuardDecision::Ok);
        CHECK(s.triggered_rules.empty());
    }
    CHECK(state.decision == GuardDecision::Ok);
}

TEST_CASE("kill flattens on the breaching step") {
    const GuardConfig c = dd_config(KillMode::Persistent);
    auto rows = stream(10, 0.0);
    rows[4].r_net = -0.25;
    const auto [state, steps] = guard_step(GuardState{}, rows, c);
    for (std::size_t i = 0; i < 4; ++i) CHECK(steps[i].decision == GuardDecision::Ok);
    CHECK(steps[4].decision == GuardDecision::Kill);
    CHECK(steps[4].exposure_out == 0.0);
    CHECK(std::find(steps[4].triggered_rules.begin(), steps[4].triggered_rules.end(), "kill:drawdown") !=
          steps[4].triggered_rules.end());
    CHECK(state.disabled);
}

TEST_CASE("watch does not flatten") {
    const GuardConfig c = dd_config(KillMode::Persistent);
    auto rows = stream(10, 0.0, 2.0);
    rows[3].r_net = -0.15;
    const auto [state, steps] = guard_step(GuardState{}, rows, c);
    CHECK(steps[3].decision == GuardDecision::Watch);
    CHECK(steps[3].exposure_out == 2.0);
    CHECK_FALSE(state.disabled);
}

TEST_CASE("persistent kill latches until resume") {
    const GuardConfig c = dd_config(KillMode::Persistent);
    auto rows = stream(5, 0.0);
    rows[2].r_net = -0.3;
    auto [state, steps] = guard_step(GuardState{}, rows, c);
    REQUIRE(state.disabled);
    const auto later = stream(200, 0.05, 1.0, rows.back().ts + 4 * kMsPerHour);
    const auto [s2, steps2] = guard_step(state, later, c);
    for (const auto& s : steps2) {
        CHECK(s.decision == GuardDecision::Kill);
        CHECK(s.exposure_out == 0.0);
    }
    const GuardState resumed = guard_resume(s2);
    CHECK_FALSE(resumed.disabled);
    CHECK(resumed.decision == GuardDecision::Ok);
    const auto [s3, steps3] = guard_step(resumed, stream(3, 0.01, 1.0, later.back().ts + 4 * kMsPerHour), c);
    CHECK(steps3.back().decision == GuardDecision::Ok);
}

TEST_CASE("temporary kill cools off then releases") {
    const GuardConfig c = dd_config(KillMode::Temporary);
    auto rows = stream(30, 0.0);
    rows[2].r_net = -0.3;
    for (std::size_t i = 3; i < rows.size(); ++i) rows[i].r_net = 0.06;
    const auto [state, steps] = guard_step(GuardState{}, rows, c);
    CHECK(steps[2].decision == GuardDecision::Kill);
    CHECK(steps[3].decision == GuardDecision::Kill);
    CHECK(steps[4].decision == GuardDecision::Kill);
    bool released = false;
    for (std::size_t i = 5; i < steps.size(); ++i) released |= steps[i].decision != GuardDecision::Kill;
    CHECK(released);
    CHECK_FALSE(state.disabled);
}

TEST_CASE("guard transitions are pure") {
    GuardConfig c = dd_config(KillMode::Temporary);
    c.watch.max_trades_30d = 2;
    c.kill.max_trades_30d = 4;
    perpsieve::Rng rng(3);
    std::vector<GuardInputRow> rows;
    for (std::size_t i = 0; i < 300; ++i) {
        rows.push_back({fixtures::kStart + static_cast<Timestamp>(i) * 4 * kMsPerHour, 0.02 * rng.normal(),
                        static_cast<double>(static_cast<int>(rng.below(3)) - 1)});
    }
    const auto a = guard_step(GuardState{}, rows, c);
    const auto b = guard_step(GuardState{}, rows, c);
    CHECK(a.first == b.first);
    REQUIRE(a.second.size() == b.second.size());
    for (std::size_t i = 0; i < a.second.size(); ++i) {
        CHECK(a.second[i].decision == b.second[i].decision);
        CHECK(a.second[i].triggered_rules == b.second[i].triggered_rules);
    }
    // streaming in two chunks gives the same result
    const std::span<const GuardInputRow> all(rows);
    const auto first = guard_step(GuardState{}, all.first(137), c);
    const auto second = guard_step(first.first, all.subspan(137), c);
    CHECK(second.first == a.first);
    for (std::size_t i = 0; i < second.second.size(); ++i) {
        CHECK(second.second[i].decision == a.second[137 + i].decision);
    }
}

TEST_CASE("out-of-order rows are rejected") {
    const GuardConfig c = dd_config(KillMode::Persistent);
    auto rows = stream(5, 0.0);
    std::swap(rows[1], rows[2]);
    CHECK_THROWS_AS(guard_step(GuardState{}, rows, c), Error);
    const auto [state, steps] = guard_step(GuardState{}, stream(5, 0.0), c);
    CHECK_THROWS_AS(guard_step(state, stream(1, 0.0), c), Error);
}

TEST_CASE("daily loss uses UTC days") {
    GuardConfig c;
    c.watch.max_daily_loss = 0.03;
    c.kill.max_daily_loss = 0.08;
    auto rows = stream(12, 0.0);  // two UTC days
    rows[1].r_net = -0.02;
    rows[2].r_net = -0.02;
    rows[7].r_net = -0.02;
    const auto [state, steps] = guard_step(GuardState{}, rows, c);
    CHECK(steps[1].decision == GuardDecision::Ok);
    CHECK(steps[2].decision == GuardDecision::Watch);
    CHECK(steps[7].decision == GuardDecision::Ok);
}

TEST_CASE("guard config validation") {
    GuardConfig c;
    c.watch.max_drawdown = 0.2;
    c.kill.max_drawdown = 0.1;
    CHECK_THROWS_AS(c.validate(), Error);
    GuardConfig d;
    d.watch.min_ann_return_30d = -0.5;
    d.kill.min_ann_return_30d = -0.2;
    CHECK_THROWS_AS(d.validate(), Error);
    GuardConfig e;
    e.bars_30d = 600;
    CHECK_THROWS_AS(e.validate(), Error);
    CHECK_NOTHROW(dd_config(KillMode::Persistent).validate());
}
