#include "perpsieve/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "perpsieve/csv.hpp"
#include "perpsieve/error.hpp"

namespace perpsieve {

void StablePolicy::validate() const {
    for (double v : {min_mean_monthly, min_worst_monthly, max_mean_dd, max_switch_density}) {
        if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "stable policy thresholds must be finite");
    }
    if (top_k < 1) fail(ErrorKind::InvalidArgument, "stable policy top_k must be >= 1");
}

std::vector<IndexWindow> rolling_windows(std::size_t n_bars, std::size_t win, std::size_t step) {
    if (win == 0 || win > n_bars) fail(ErrorKind::InvalidArgument, "rolling window length must be in [1, n_bars]");
    if (step == 0) fail(ErrorKind::InvalidArgument, "rolling window step must be >= 1");
    std::vector<IndexWindow> out;
    for (std::size_t start = 0; start + win <= n_bars; start += step) out.push_back({start, start + win});
    return out;
}

ScenarioSummary summarize(std::size_t candidate_id, std::vector<ScenarioStat> stats) {
    if (stats.empty()) fail(ErrorKind::InvalidArgument, "scenario summary needs at least one scenario");
    ScenarioSummary s;
    s.candidate_id = candidate_id;
    s.min_monthly_true = std::numeric_limits<double>::infinity();
    double sum_g = 0.0, sum_dd = 0.0, sum_sw = 0.0;
    for (const ScenarioStat& st : stats) {
        sum_g += st.monthly_geom;
        sum_dd += st.max_dd;
        sum_sw += st.switch_density;
        s.min_monthly_true = std::min(s.min_monthly_true, st.monthly_geom);
    }
    const auto n = static_cast<double>(stats.size());
    s.mean_monthly_true = sum_g / n;
    s.maxdd_mean = sum_dd / n;
    s.switch_density_mean = sum_sw / n;
    s.per_scenario = std::move(stats);
    return s;
}

std::vector<ScenarioSummary> evaluate_pool(const std::vector<Candidate>& pool, const BarSeries& series,
                                           const FundingSeries& funding, const CostProfile& base,
                                           const std::vector<CostScenario>& scenarios, const WindowSpec& window) {
    if (scenarios.empty()) fail(ErrorKind::InvalidArgument, "no cost scenarios to evaluate");
    require_valid(series);
    std::vector<ScenarioSummary> out;
    out.reserve(pool.size());
    for (const Candidate& c : pool) {
        std::vector<ScenarioStat> stats;
        stats.reserve(scenarios.size());
        for (const CostScenario& sc : scenarios) {
            const BacktestResult r = run_backtest(series, funding, c.params, sc.apply(base), window, Semantics::StrictT1);
            const MetricsSummary m = metrics(r, 0.0);
            stats.push_back({sc.label, m.monthly_geom, m.max_dd, m.switch_density});
        }
        out.push_back(summarize(c.id, std::move(stats)));
    }
    return out;
}

bool passes(const ScenarioSummary& s, const StablePolicy& policy) {
    return s.mean_monthly_true >= policy.min_mean_monthly && s.min_monthly_true >= policy.min_worst_monthly &&
           s.maxdd_mean <= policy.max_mean_dd && s.switch_density_mean <= policy.max_switch_density;
}

ScreeningReport stable_filter(const std::vector<ScenarioSummary>& summaries, const StablePolicy& policy) {
    policy.validate();
    ScreeningReport report;
    report.pool_size = summaries.size();
    report.summaries = summaries;
    std::vector<const ScenarioSummary*> ok;
    for (const auto& s : summaries) {
        if (passes(s, policy)) {
            report.passing.push_back(s.candidate_id);
            ok.push_back(&s);
        }
    }
    std::sort(ok.begin(), ok.end(), [](const ScenarioSummary* a, const ScenarioSummary* b) {
        if (a->mean_monthly_true != b->mean_monthly_true) return a->mean_monthly_true > b->mean_monthly_true;
        if (a->maxdd_mean != b->maxdd_mean) return a->maxdd_mean < b->maxdd_mean;
        return a->candidate_id < b->candidate_id;
    });
    for (std::size_t i = 0; i < std::min(policy.top_k, ok.size()); ++i) report.top_k.push_back(ok[i]->candidate_id);
    return report;
}

std::vector<ThresholdScanRow> threshold_scan(const std::vector<ScenarioSummary>& summaries,
                                             const std::vector<double>& floors, const std::vector<double>& dd_caps,
                                             const std::vector<double>& switch_caps, const StablePolicy& base) {
    if (floors.empty() || dd_caps.empty() || switch_caps.empty()) {
        fail(ErrorKind::InvalidArgument, "threshold grids must be non-empty");
    }
    std::vector<ThresholdScanRow> rows;
    for (double f : floors) {
        for (double dd : dd_caps) {
            for (double sw : switch_caps) {
                StablePolicy p = base;
                p.min_mean_monthly = f;
                p.max_mean_dd = dd;
                p.max_switch_density = sw;
                const ScreeningReport r = stable_filter(summaries, p);
                ThresholdScanRow row{f, dd, sw, std::nullopt, r.passing.size()};
                if (!r.top_k.empty()) row.selected = r.top_k.front();
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<WindowStat> evaluate_windows(const std::vector<Candidate>& pool, const BarSeries& series,
                                         const FundingSeries& funding, const CostProfile& profile,
                                         const WindowSpec& within, std::size_t win, std::size_t step,
                                         double rf_annual) {
    require_valid(series);
    const IndexRange range = window_range(series, within);
    const std::vector<IndexWindow> windows = rolling_windows(range.size(), win, step);
    std::vector<WindowStat> out;
    for (const Candidate& c : pool) {
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const Bar& first = series.bars[range.first + windows[w].start];
            const Bar& last = series.bars[range.first + windows[w].end - 1];
            WindowSpec spec{within.name + "#" + std::to_string(w), first.ts, last.ts + series.bar_ms()};
            const BacktestResult r = run_backtest(series, funding, c.params, profile, spec, Semantics::StrictT1);
            out.push_back({c.id, w, spec, metrics(r, rf_annual)});
        }
    }
    return out;
}

void write_robust_summary_csv(const std::vector<ScenarioSummary>& summaries, const std::string& path,
                              const std::string& run_id) {
    auto out = csv::open_for_write(path, "candidate_id,scenario,monthly_geom,max_dd,switch_density", run_id);
    for (const auto& s : summaries) {
        for (const auto& st : s.per_scenario) {
            out << s.candidate_id << ',' << st.scenario << ',' << csv::format_double(st.monthly_geom) << ','
                << csv::format_double(st.max_dd) << ',' << csv::format_double(st.switch_density) << '\n';
        }
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

void write_aggregates_csv(const std::vector<ScenarioSummary>& summaries, const ScreeningReport& report,
                          const std::string& path, const std::string& run_id) {
    auto out = csv::open_for_write(
        path, "candidate_id,mean_monthly_true,min_monthly_true,maxDD_mean,switch_density_mean,passed,rank", run_id);
    for (const auto& s : summaries) {
        const bool passed = std::find(report.passing.begin(), report.passing.end(), s.candidate_id) !=
                            report.passing.end();
        const auto it = std::find(report.top_k.begin(), report.top_k.end(), s.candidate_id);
        out << s.candidate_id << ',' << csv::format_double(s.mean_monthly_true) << ','
            << csv::format_double(s.min_monthly_true) << ',' << csv::format_double(s.maxdd_mean) << ','
            << csv::format_double(s.switch_density_mean) << ',' << (passed ? 1 : 0) << ',';
        if (it != report.top_k.end()) out << (it - report.top_k.begin() + 1);
        out << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

void write_threshold_scan_csv(const std::vector<ThresholdScanRow>& rows, const std::string& path,
                              const std::string& run_id) {
    auto out = csv::open_for_write(path, "min_mean_monthly,max_mean_dd,max_switch_density,selected_id,n_passing",
                                   run_id);
    for (const auto& r : rows) {
        out << csv::format_double(r.min_mean_monthly) << ',' << csv::format_double(r.max_mean_dd) << ','
            << csv::format_double(r.max_switch_density) << ',';
        if (r.selected) out << *r.selected;
        out << ',' << r.n_passing << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

void write_window_summary_csv(const std::vector<WindowStat>& rows, const std::string& path,
                              const std::string& run_id) {
    auto out = csv::open_for_write(
        path, "candidate_id,window,start,end,ann_return,sharpe,max_dd,monthly_geom,switch_density,trades", run_id);
    for (const auto& r : rows) {
        out << r.candidate_id << ',' << r.window_index << ',' << format_iso8601(r.window.start_ts) << ','
            << format_iso8601(r.window.end_ts) << ',' << csv::format_double(r.metrics.ann_return) << ','
            << csv::format_double(r.metrics.sharpe) << ',' << csv::format_double(r.metrics.max_dd) << ','
            << csv::format_double(r.metrics.monthly_geom) << ',' << csv::format_double(r.metrics.switch_density)
            << ',' << r.metrics.trades << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

}  // namespace perpsieve
