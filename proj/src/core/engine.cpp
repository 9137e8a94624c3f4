#include "perpsieve/engine.hpp"

#include <algorithm>
#include <cmath>

#include "perpsieve/config.hpp"
#include "perpsieve/csv.hpp"
#include "perpsieve/error.hpp"
#include "perpsieve/stats.hpp"

namespace perpsieve {

const char* to_string(Semantics s) noexcept { return s == Semantics::StrictT1 ? "strict" : "naive"; }

Semantics semantics_from_string(const std::string& s) {
    if (s == "strict" || s == "strict_t1") return Semantics::StrictT1;
    if (s == "naive" || s == "naive_t0") return Semantics::NaiveT0;
    fail(ErrorKind::InvalidArgument, "unknown semantics '" + s + "' (expected strict|naive)");
}

std::vector<double> gate_funding(const std::vector<double>& aligned, const CostProfile& profile) {
    if (profile.funding_mode == FundingMode::Off) return std::vector<double>(aligned.size(), 0.0);
    return aligned;
}

double exposure_cap(const StrategyParams& params, const CostProfile& profile) {
    double cap = profile.exposure_cap();
    if (params.max_exposure_abs > 0.0) cap = std::min(cap, params.max_exposure_abs);
    return cap;
}

namespace {

IndexRange checked_range(const BarSeries& series, const WindowSpec& window) {
    if (series.empty()) fail(ErrorKind::InvalidArgument, "empty bar series");
    const Timestamp data_end = series.bars.back().ts + series.bar_ms();
    if (window.start_ts < series.bars.front().ts || window.end_ts > data_end) {
        fail(ErrorKind::InvalidArgument, "window '" + window.name + "' [" + format_iso8601(window.start_ts) + ", " +
                                             format_iso8601(window.end_ts) + ") lies outside the data");
    }
    const IndexRange r = window_range(series, window);
    if (r.size() == 0) fail(ErrorKind::InvalidArgument, "window '" + window.name + "' contains no bars");
    return r;
}

}  // namespace

BacktestResult execute_signals(const BarSeries& series, std::span<const double> aligned_funding,
                               std::span<const std::int8_t> signals, double cap, const CostProfile& profile,
                               const WindowSpec& window, Semantics semantics) {
    profile.validate();
    if (signals.size() != series.size() || aligned_funding.size() != series.size()) {
        fail(ErrorKind::InvalidArgument, "signal/funding length does not match the bar series");
    }
    if (!(cap >= 0.0) || !std::isfinite(cap)) fail(ErrorKind::InvalidArgument, "exposure cap must be finite and >= 0");
    const IndexRange range = checked_range(series, window);
    const double bar_hours = static_cast<double>(series.freq_hours);

    BacktestResult result;
    result.window = window;
    result.semantics = semantics;
    result.bar_hours = series.freq_hours;
    result.profile = profile;
    result.profile_digest = digest_of(to_json(profile));
    result.ledger.reserve(range.size());
    result.funding_rates.reserve(range.size());

    double prev_exposure = 0.0;
    for (std::size_t t = range.first; t < range.last; ++t) {
        LedgerRow row;
        row.ts = series.bars[t].ts;
        row.signal = signals[t];
        if (t > range.first) {
            const int executed = semantics == Semantics::StrictT1 ? signals[t - 1] : signals[t];
            row.exposure = executed * cap;
        }
        row.r_mkt = t > 0 ? series.bars[t].close / series.bars[t - 1].close - 1.0 : 0.0;
        row.r_raw = row.exposure * row.r_mkt;
        const CostBreakdown c = bar_costs(prev_exposure, row.exposure, aligned_funding[t], bar_hours, profile);
        row.c_fee = c.fee;
        row.c_slip = c.slip;
        row.c_fund = c.funding;
        row.r_net = row.r_raw - row.c_fee - row.c_slip - row.c_fund;
        prev_exposure = row.exposure;
        result.ledger.push_back(row);
        result.funding_rates.push_back(aligned_funding[t]);
    }
    return result;
}

BacktestResult run_backtest(const BarSeries& series, const FundingSeries& funding, const StrategyParams& params,
                            const CostProfile& profile, const WindowSpec& window, Semantics semantics) {
    params.validate();
    profile.validate();
    require_valid(series);
    checked_range(series, window);

    FundingSeries with_fallback = funding;
    with_fallback.fallback_rate = profile.fallback_rate_8h;
    const std::vector<double> aligned = align_funding(with_fallback, series);
    const std::vector<std::int8_t> signals = generate_signals(series, gate_funding(aligned, profile), params);

    BacktestResult result =
        execute_signals(series, aligned, signals, exposure_cap(params, profile), profile, window, semantics);
    result.params_digest = digest_of(to_json(params));
    return result;
}

double annualize(double total_return, std::size_t n_bars) {
    if (n_bars == 0) fail(ErrorKind::InvalidArgument, "annualize needs at least one bar");
    if (!(total_return > -1.0)) fail(ErrorKind::Numerical, "total return <= -1 cannot be annualized");
    if (total_return == 0.0) return 0.0;
    return std::pow(1.0 + total_return, kAnnualizationFactor / static_cast<double>(n_bars)) - 1.0;
}

double compounded_return(std::span<const double> returns) {
    double growth = 1.0;
    for (double r : returns) growth *= 1.0 + r;
    return growth - 1.0;
}

std::vector<double> monthly_returns(std::span<const Timestamp> ts, std::span<const double> returns) {
    if (ts.size() != returns.size()) fail(ErrorKind::InvalidArgument, "timestamp/return length mismatch");
    std::vector<double> out;
    std::size_t i = 0;
    while (i < ts.size()) {
        const std::int64_t key = utc_month_key(ts[i]);
        double growth = 1.0;
        for (; i < ts.size() && utc_month_key(ts[i]) == key; ++i) growth *= 1.0 + returns[i];
        out.push_back(growth - 1.0);
    }
    return out;
}

double monthly_geom(std::span<const Timestamp> ts, std::span<const double> returns) {
    const std::vector<double> months = monthly_returns(ts, returns);
    if (months.empty()) return 0.0;
    double sum_log = 0.0;
    for (double r : months) sum_log += std::log1p(std::max(r, -0.999999));
    return std::expm1(sum_log / static_cast<double>(months.size()));
}

double max_drawdown(std::span<const double> returns) {
    double equity = 1.0;
    double peak = 1.0;
    double worst = 0.0;
    for (double r : returns) {
        equity *= 1.0 + r;
        peak = std::max(peak, equity);
        const double dd = equity > 0.0 ? 1.0 - equity / peak : 1.0;
        worst = std::max(worst, dd);
    }
    return std::clamp(worst, 0.0, 1.0);
}

MetricsSummary compute_metrics(std::span<const Timestamp> ts, std::span<const double> returns,
                               std::span<const double> exposures, double rf_annual) {
    if (returns.empty()) fail(ErrorKind::InvalidArgument, "metrics need a non-empty ledger");
    MetricsSummary m;
    m.n_bars = returns.size();
    m.total_return = compounded_return(returns);
    m.ann_return = m.total_return > -1.0 ? annualize(m.total_return, m.n_bars) : -1.0;
    const double sd = stats::sample_sd(returns);
    if (sd > 0.0) {
        m.sharpe = (stats::mean(returns) - rf_annual / kAnnualizationFactor) / sd * std::sqrt(kAnnualizationFactor);
    }
    m.max_dd = max_drawdown(returns);
    m.monthly_geom = monthly_geom(ts, returns);
    double prev = 0.0;
    for (double e : exposures) {
        if (e != prev) ++m.trades;
        prev = e;
    }
    m.switch_density = static_cast<double>(m.trades) / static_cast<double>(m.n_bars);
    return m;
}

std::vector<Timestamp> ledger_timestamps(const BacktestResult& result) {
    std::vector<Timestamp> ts;
    ts.reserve(result.ledger.size());
    for (const auto& r : result.ledger) ts.push_back(r.ts);
    return ts;
}

std::vector<double> ledger_net(const BacktestResult& result) {
    std::vector<double> r;
    r.reserve(result.ledger.size());
    for (const auto& row : result.ledger) r.push_back(row.r_net);
    return r;
}

MetricsSummary metrics(const BacktestResult& result, double rf_annual) {
    std::vector<double> exposure;
    exposure.reserve(result.ledger.size());
    for (const auto& row : result.ledger) exposure.push_back(row.exposure);
    return compute_metrics(ledger_timestamps(result), ledger_net(result), exposure, rf_annual);
}

MetricsSummary buy_and_hold(const BarSeries& series, const WindowSpec& window, double rf_annual) {
    const IndexRange range = checked_range(series, window);
    std::vector<Timestamp> ts;
    std::vector<double> r;
    for (std::size_t t = range.first; t < range.last; ++t) {
        ts.push_back(series.bars[t].ts);
        r.push_back(t > range.first ? series.bars[t].close / series.bars[t - 1].close - 1.0 : 0.0);
    }
    return compute_metrics(ts, r, {}, rf_annual);
}

WindowSpec full_window(const BarSeries& series, std::string name) {
    if (series.empty()) fail(ErrorKind::InvalidArgument, "empty bar series");
    return {std::move(name), series.bars.front().ts, series.bars.back().ts + series.bar_ms()};
}

void write_ledger_csv(const BacktestResult& result, const std::string& path, const std::string& run_id) {
    auto out = csv::open_for_write(path, kLedgerHeader, run_id);
    for (const LedgerRow& r : result.ledger) {
        out << r.ts << ',' << r.signal << ',' << csv::format_double(r.exposure) << ',' << csv::format_double(r.r_mkt)
            << ',' << csv::format_double(r.r_raw) << ',' << csv::format_double(r.c_fee) << ','
            << csv::format_double(r.c_slip) << ',' << csv::format_double(r.c_fund) << ','
            << csv::format_double(r.r_net) << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

std::vector<LedgerRow> read_ledger_csv(const std::string& path) {
    csv::Reader reader(path, kLedgerHeader);
    std::vector<LedgerRow> rows;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        if (f.size() != 9) {
            fail(ErrorKind::Schema, path + ":" + std::to_string(reader.line_number()) + ": expected 9 ledger fields");
        }
        LedgerRow r;
        r.ts = csv::parse_int(f[0]);
        r.signal = static_cast<int>(csv::parse_int(f[1]));
        if (r.signal < -1 || r.signal > 1) fail(ErrorKind::Schema, path + ": signal outside {-1,0,1}");
        r.exposure = csv::parse_double(f[2]);
        r.r_mkt = csv::parse_double(f[3]);
        r.r_raw = csv::parse_double(f[4]);
        r.c_fee = csv::parse_double(f[5]);
        r.c_slip = csv::parse_double(f[6]);
        r.c_fund = csv::parse_double(f[7]);
        r.r_net = csv::parse_double(f[8]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace perpsieve
