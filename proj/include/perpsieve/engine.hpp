#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perpsieve/costs.hpp"
#include "perpsieve/marketdata.hpp"
#include "perpsieve/signal.hpp"

namespace perpsieve {

inline constexpr double kAnnualizationFactor = 2190.0;  // 6 four-hour bars x 365 days

enum class Semantics { StrictT1, NaiveT0 };

const char* to_string(Semantics s) noexcept;
Semantics semantics_from_string(const std::string& s);

struct LedgerRow {
    Timestamp ts = 0;
    int signal = 0;
    double exposure = 0.0;
    double r_mkt = 0.0;
    double r_raw = 0.0;
    double c_fee = 0.0;
    double c_slip = 0.0;
    double c_fund = 0.0;
    double r_net = 0.0;

    bool operator==(const LedgerRow&) const = default;
};

inline constexpr const char* kLedgerHeader = "timestamp,signal,exposure,r_mkt,r_raw,c_fee,c_slip,c_fund,r_net";

struct BacktestResult {
    std::vector<LedgerRow> ledger;
    WindowSpec window;
    std::string params_digest;
    std::string profile_digest;
    Semantics semantics = Semantics::StrictT1;
    int bar_hours = 4;
    // Carried so overlays can re-derive costs from a modified exposure path.
    CostProfile profile;
    std::vector<double> funding_rates;
};

struct MetricsSummary {
    double ann_return = 0.0;
    double sharpe = 0.0;
    double max_dd = 0.0;
    double monthly_geom = 0.0;
    std::size_t trades = 0;
    double switch_density = 0.0;
    double total_return = 0.0;
    std::size_t n_bars = 0;
};

/// Per-bar rates the signal's funding gates observe under a profile: the aligned
/// realized series, or zeros when the profile switches funding off.
std::vector<double> gate_funding(const std::vector<double>& aligned, const CostProfile& profile);

/// Exposure path, costs and ledger for a fixed signal path. `signals` covers
/// every bar of `series`; rows are emitted for the window only.
BacktestResult execute_signals(const BarSeries& series, std::span<const double> aligned_funding,
                               std::span<const std::int8_t> signals, double exposure_cap,
                               const CostProfile& profile, const WindowSpec& window, Semantics semantics);

/// Validates inputs, aligns funding, generates signals and executes them.
BacktestResult run_backtest(const BarSeries& series, const FundingSeries& funding, const StrategyParams& params,
                            const CostProfile& profile, const WindowSpec& window,
                            Semantics semantics = Semantics::StrictT1);

/// min(max_leverage, notional_cap / equity, max_exposure_abs when > 0)
double exposure_cap(const StrategyParams& params, const CostProfile& profile);

/// (1 + total)^(2190 / n_bars) - 1. Throws Error(Numerical) when total <= -1.
double annualize(double total_return, std::size_t n_bars);

/// exp(mean over UTC months of log(1 + max(R_m, -0.999999))) - 1.
double monthly_geom(std::span<const Timestamp> ts, std::span<const double> returns);

/// Compounded returns per UTC calendar month, in month order.
std::vector<double> monthly_returns(std::span<const Timestamp> ts, std::span<const double> returns);

double max_drawdown(std::span<const double> returns);

double compounded_return(std::span<const double> returns);

/// Ruined runs (total <= -1) report ann_return = -1.
MetricsSummary compute_metrics(std::span<const Timestamp> ts, std::span<const double> returns,
                               std::span<const double> exposures, double rf_annual);

MetricsSummary metrics(const BacktestResult& result, double rf_annual = 0.03);

/// Unit long exposure from the second window bar on, zero costs, no trades reported.
MetricsSummary buy_and_hold(const BarSeries& series, const WindowSpec& window, double rf_annual = 0.03);

WindowSpec full_window(const BarSeries& series, std::string name = "Full");

std::vector<Timestamp> ledger_timestamps(const BacktestResult& result);
std::vector<double> ledger_net(const BacktestResult& result);

void write_ledger_csv(const BacktestResult& result, const std::string& path, const std::string& run_id = {});
std::vector<LedgerRow> read_ledger_csv(const std::string& path);

}  // namespace perpsieve
