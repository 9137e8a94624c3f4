#include "perpsieve/audit.hpp"

#include <algorithm>
#include <cmath>

#include "perpsieve/config.hpp"
#include "perpsieve/csv.hpp"
#include "perpsieve/error.hpp"

namespace perpsieve {

namespace {

// Trades are decision changes; exposure-level faults show up in the exposure diff.
std::size_t count_trades(std::span<const LedgerRow> rows) {
    std::size_t n = 0;
    int prev = 0;
    for (const auto& r : rows) {
        if (r.signal != prev) ++n;
        prev = r.signal;
    }
    return n;
}

template <typename F>
double column_sum(std::span<const LedgerRow> rows, F f) {
    double s = 0.0;
    for (const auto& r : rows) s += f(r);
    return s;
}

}  // namespace

AuditReport audit_ledgers(std::span<const LedgerRow> reference, std::span<const LedgerRow> replay, double tolerance) {
    if (!(tolerance >= 0.0)) fail(ErrorKind::InvalidArgument, "audit tolerance must be >= 0");
    if (reference.size() != replay.size()) {
        fail(ErrorKind::Schema, "reference ledger has " + std::to_string(reference.size()) + " rows, replay has " +
                                    std::to_string(replay.size()));
    }
    AuditReport rep;
    rep.n_bars = reference.size();
    rep.tolerance = tolerance;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i].ts != replay[i].ts) {
            fail(ErrorKind::Schema, "ledger timestamps diverge at row " + std::to_string(i));
        }
        rep.max_abs_signal_diff =
            std::max(rep.max_abs_signal_diff, std::abs(static_cast<double>(reference[i].signal - replay[i].signal)));
        rep.max_abs_exposure_diff =
            std::max(rep.max_abs_exposure_diff, std::abs(reference[i].exposure - replay[i].exposure));
    }
    rep.trades_diff = static_cast<double>(count_trades(reference)) - static_cast<double>(count_trades(replay));
    rep.fees_diff = column_sum(reference, [](const LedgerRow& r) { return r.c_fee; }) -
                    column_sum(replay, [](const LedgerRow& r) { return r.c_fee; });
    rep.slip_diff = column_sum(reference, [](const LedgerRow& r) { return r.c_slip; }) -
                    column_sum(replay, [](const LedgerRow& r) { return r.c_slip; });
    rep.fund_diff = column_sum(reference, [](const LedgerRow& r) { return r.c_fund; }) -
                    column_sum(replay, [](const LedgerRow& r) { return r.c_fund; });
    rep.pass = true;
    for (double d : {rep.max_abs_signal_diff, rep.max_abs_exposure_diff, rep.trades_diff, rep.fees_diff,
                     rep.slip_diff, rep.fund_diff}) {
        if (!(std::abs(d) <= tolerance)) rep.pass = false;
    }
    return rep;
}

AuditReport replay_and_audit(const ReplayInputs& inputs, std::span<const LedgerRow> reference, double tolerance) {
    if (inputs.series == nullptr || inputs.funding == nullptr) {
        fail(ErrorKind::InvalidArgument, "replay needs both bar and funding inputs");
    }
    const BacktestResult replay = run_backtest(*inputs.series, *inputs.funding, inputs.params, inputs.profile,
                                               inputs.window, inputs.semantics);
    return audit_ledgers(reference, replay.ledger, tolerance);
}

std::string audit_report_json(const AuditReport& report, const std::string& run_id) {
    Json j = to_json(report);
    if (!run_id.empty()) j["run_id"] = run_id;
    return j.dump(2) + "\n";
}

const char* to_string(GuardDecision d) noexcept {
    switch (d) {
        case GuardDecision::Ok: return "ok";
        case GuardDecision::Watch: return "watch";
        case GuardDecision::Kill: return "kill";
    }
    return "ok";
}

namespace {

void check_pair(const std::optional<double>& watch, const std::optional<double>& kill, bool floor, const char* name) {
    for (const auto& v : {watch, kill}) {
        if (v && !std::isfinite(*v)) fail(ErrorKind::InvalidArgument, std::string("guard rule ") + name + " must be finite");
    }
    if (watch && kill && (floor ? *kill > *watch : *kill < *watch)) {
        fail(ErrorKind::InvalidArgument, std::string("kill threshold for ") + name + " is less severe than watch");
    }
}

double window_ann_return(const std::deque<double>& returns, std::size_t bars) {
    double growth = 1.0;
    for (auto it = returns.end() - static_cast<std::ptrdiff_t>(bars); it != returns.end(); ++it) growth *= 1.0 + *it;
    if (!(growth > 0.0)) return -1.0;
    return std::pow(growth, kAnnualizationFactor / static_cast<double>(bars)) - 1.0;
}

struct RollingView {
    std::optional<double> ann_30d;
    std::optional<double> ann_90d;
    double drawdown = 0.0;
    double daily_loss = 0.0;
    double trades_30d = 0.0;
};

void evaluate(const GuardRules& rules, const RollingView& v, const char* prefix, std::vector<std::string>& fired) {
    auto hit = [&](const char* rule) { fired.push_back(std::string(prefix) + ":" + rule); };
    if (rules.min_ann_return_30d && v.ann_30d && *v.ann_30d < *rules.min_ann_return_30d) hit("ann_return_30d");
    if (rules.min_ann_return_90d && v.ann_90d && *v.ann_90d < *rules.min_ann_return_90d) hit("ann_return_90d");
    if (rules.max_drawdown && v.drawdown > *rules.max_drawdown) hit("drawdown");
    if (rules.max_daily_loss && v.daily_loss > *rules.max_daily_loss) hit("daily_loss");
    if (rules.max_trades_30d && v.trades_30d > *rules.max_trades_30d) hit("trades_30d");
}

}  // namespace

void GuardConfig::validate() const {
    check_pair(watch.min_ann_return_30d, kill.min_ann_return_30d, true, "min_ann_return_30d");
    check_pair(watch.min_ann_return_90d, kill.min_ann_return_90d, true, "min_ann_return_90d");
    check_pair(watch.max_drawdown, kill.max_drawdown, false, "max_drawdown");
    check_pair(watch.max_daily_loss, kill.max_daily_loss, false, "max_daily_loss");
    check_pair(watch.max_trades_30d, kill.max_trades_30d, false, "max_trades_30d");
    if (bars_30d == 0 || bars_90d < bars_30d) fail(ErrorKind::InvalidArgument, "guard horizons need 0 < bars_30d <= bars_90d");
    if (temporary_kill_bars == 0) fail(ErrorKind::InvalidArgument, "temporary_kill_bars must be >= 1");
}

std::pair<GuardState, std::vector<GuardStep>> guard_step(const GuardState& state, std::span<const GuardInputRow> rows,
                                                        const GuardConfig& config) {
    config.validate();
    GuardState s = state;
    std::vector<GuardStep> steps;
    steps.reserve(rows.size());
    if (s.equity.empty()) s.equity.push_back(s.equity_now);

    for (const GuardInputRow& row : rows) {
        if (s.last_ts && row.ts <= *s.last_ts) {
            fail(ErrorKind::InvalidArgument, "guard rows must be strictly time-ordered");
        }
        if (!std::isfinite(row.r_net) || !std::isfinite(row.exposure)) {
            fail(ErrorKind::InvalidArgument, "guard rows must be finite");
        }
        s.last_ts = row.ts;

        s.returns.push_back(row.r_net);
        s.trade_flags.push_back(row.exposure != s.prev_exposure ? 1 : 0);
        s.prev_exposure = row.exposure;
        s.equity_now *= 1.0 + row.r_net;
        s.equity.push_back(s.equity_now);
        while (s.returns.size() > config.bars_90d) s.returns.pop_front();
        while (s.trade_flags.size() > config.bars_30d) s.trade_flags.pop_front();
        while (s.equity.size() > config.bars_90d + 1) s.equity.pop_front();

        const std::int64_t day = utc_day_key(row.ts);
        if (day != s.day) {
            s.day = day;
            s.day_growth = 1.0;
        }
        s.day_growth *= 1.0 + row.r_net;

        RollingView v;
        if (s.returns.size() >= config.bars_30d) v.ann_30d = window_ann_return(s.returns, config.bars_30d);
        if (s.returns.size() >= config.bars_90d) v.ann_90d = window_ann_return(s.returns, config.bars_90d);
        const double high = *std::max_element(s.equity.begin(), s.equity.end());
        v.drawdown = high > 0.0 ? 1.0 - s.equity_now / high : 1.0;
        v.daily_loss = std::max(0.0, 1.0 - s.day_growth);
        v.trades_30d = static_cast<double>(std::count(s.trade_flags.begin(), s.trade_flags.end(), 1));

        GuardStep step;
        step.ts = row.ts;
        std::vector<std::string> kill_fired, watch_fired;
        evaluate(config.kill, v, "kill", kill_fired);
        evaluate(config.watch, v, "watch", watch_fired);

        GuardDecision d;
        if (s.disabled) {
            d = GuardDecision::Kill;
            step.triggered_rules = kill_fired;
            step.triggered_rules.insert(step.triggered_rules.begin(), "latched");
        } else if (!kill_fired.empty()) {
            d = GuardDecision::Kill;
            step.triggered_rules = kill_fired;
            if (config.kill_mode == KillMode::Persistent) {
                s.disabled = true;
            } else {
                s.kill_bars_left = config.temporary_kill_bars - 1;
            }
        } else if (s.kill_bars_left > 0) {
            d = GuardDecision::Kill;
            --s.kill_bars_left;
            step.triggered_rules = {"cooling_off"};
        } else if (!watch_fired.empty()) {
            d = GuardDecision::Watch;
            step.triggered_rules = watch_fired;
        } else {
            d = GuardDecision::Ok;
        }
        step.decision = d;
        step.exposure_out = d == GuardDecision::Kill ? 0.0 : row.exposure;
        if (d != s.decision) s.last_transition_ts = row.ts;
        s.decision = d;
        steps.push_back(std::move(step));
    }
    return {std::move(s), std::move(steps)};
}

GuardState guard_resume(const GuardState& state) {
    GuardState s = state;
    s.disabled = false;
    s.kill_bars_left = 0;
    if (s.decision != GuardDecision::Ok) {
        s.decision = GuardDecision::Ok;
        s.last_transition_ts = s.last_ts;
    }
    return s;
}

void write_guard_log_csv(std::span<const GuardStep> steps, const std::string& path, const std::string& run_id) {
    auto out = csv::open_for_write(path, kGuardLogHeader, run_id);
    for (const auto& st : steps) {
        out << st.ts << ',' << to_string(st.decision) << ',';
        for (std::size_t i = 0; i < st.triggered_rules.size(); ++i) out << (i ? ";" : "") << st.triggered_rules[i];
        out << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

}  // namespace perpsieve
