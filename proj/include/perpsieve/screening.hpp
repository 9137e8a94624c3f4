#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "perpsieve/costs.hpp"
#include "perpsieve/engine.hpp"

namespace perpsieve {

struct StablePolicy {
    double min_mean_monthly = 0.005;
    double min_worst_monthly = 0.0;
    double max_mean_dd = 0.30;
    double max_switch_density = 0.12;
    std::size_t top_k = 5;

    void validate() const;
};

struct Candidate {
    std::size_t id = 0;
    StrategyParams params;
};

struct ScenarioStat {
    std::string scenario;
    double monthly_geom = 0.0;
    double max_dd = 0.0;
    double switch_density = 0.0;
};

struct ScenarioSummary {
    std::size_t candidate_id = 0;
    std::vector<ScenarioStat> per_scenario;
    double mean_monthly_true = 0.0;
    double min_monthly_true = 0.0;
    double maxdd_mean = 0.0;
    double switch_density_mean = 0.0;
};

struct ScreeningReport {
    std::size_t pool_size = 0;
    std::vector<std::size_t> passing;  // candidate ids, pool order
    std::vector<std::size_t> top_k;    // ranked
    std::vector<ScenarioSummary> summaries;
};

struct IndexWindow {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
};

/// Fixed-length windows at 0, step, 2*step, ... while start + win <= n_bars.
std::vector<IndexWindow> rolling_windows(std::size_t n_bars, std::size_t win, std::size_t step);

/// Aggregates exact mean/min over the scenario stats.
ScenarioSummary summarize(std::size_t candidate_id, std::vector<ScenarioStat> stats);

/// One strict backtest per (candidate, scenario); params are never modified.
std::vector<ScenarioSummary> evaluate_pool(const std::vector<Candidate>& pool, const BarSeries& series,
                                           const FundingSeries& funding, const CostProfile& base,
                                           const std::vector<CostScenario>& scenarios, const WindowSpec& window);

bool passes(const ScenarioSummary& s, const StablePolicy& policy);

ScreeningReport stable_filter(const std::vector<ScenarioSummary>& summaries, const StablePolicy& policy);

struct ThresholdScanRow {
    double min_mean_monthly = 0.0;
    double max_mean_dd = 0.0;
    double max_switch_density = 0.0;
    std::optional<std::size_t> selected;
    std::size_t n_passing = 0;
};

/// stable_filter over floor x dd x switch grids (floor-major); other policy fields taken from `base`.
std::vector<ThresholdScanRow> threshold_scan(const std::vector<ScenarioSummary>& summaries,
                                             const std::vector<double>& floors, const std::vector<double>& dd_caps,
                                             const std::vector<double>& switch_caps, const StablePolicy& base = {});

struct WindowStat {
    std::size_t candidate_id = 0;
    std::size_t window_index = 0;
    WindowSpec window;
    MetricsSummary metrics;
};

/// Report-only robustness stream: each candidate re-run on every rolling window of `within`.
std::vector<WindowStat> evaluate_windows(const std::vector<Candidate>& pool, const BarSeries& series,
                                         const FundingSeries& funding, const CostProfile& profile,
                                         const WindowSpec& within, std::size_t win, std::size_t step,
                                         double rf_annual = 0.03);

void write_robust_summary_csv(const std::vector<ScenarioSummary>& summaries, const std::string& path,
                              const std::string& run_id = {});
void write_aggregates_csv(const std::vector<ScenarioSummary>& summaries, const ScreeningReport& report,
                          const std::string& path, const std::string& run_id = {});
void write_threshold_scan_csv(const std::vector<ThresholdScanRow>& rows, const std::string& path,
                              const std::string& run_id = {});
void write_window_summary_csv(const std::vector<WindowStat>& rows, const std::string& path,
                              const std::string& run_id = {});

}  // namespace perpsieve
