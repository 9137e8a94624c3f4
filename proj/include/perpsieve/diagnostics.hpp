#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perpsieve/engine.hpp"
#include "perpsieve/screening.hpp"

namespace perpsieve {

// ---------------------------------------------------------------------------
// Deflated Sharpe ratio
// ---------------------------------------------------------------------------

/// Expected maximum annualized Sharpe among n_trials unskilled trials whose
/// Sharpe estimates have the given cross-trial variance (annualized units).
double expected_max_sharpe(std::size_t n_trials, double sr_variance);

/// Probability that the true Sharpe exceeds the multiple-testing benchmark.
/// sr_hat and sr_variance are annualized; both are converted to per-bar units
/// internally. kurtosis is non-excess (3 for normal returns).
double deflated_sharpe(double sr_hat, std::size_t n_obs, double skew, double kurtosis, std::size_t n_trials,
                       double sr_variance);

// ---------------------------------------------------------------------------
// CSCV / probability of backtest overfitting
// ---------------------------------------------------------------------------

struct ReturnMatrix {
    std::size_t rows = 0;  // candidates
    std::size_t cols = 0;  // time steps
    std::vector<double> values;  // row-major
    std::vector<std::size_t> candidate_ids;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct PboResult {
    double pbo = 0.0;
    std::size_t n_splits = 0;
    std::vector<double> logits;
};

std::size_t binomial(std::size_t n, std::size_t k);

/// Segment-mean performance; in-sample winner's relative out-of-sample rank ω
/// gives logit ln(ω / (1 - ω)); PBO = fraction of splits with logit <= 0.
PboResult cscv_pbo(const ReturnMatrix& matrix, std::size_t n_segments);

// ---------------------------------------------------------------------------
// Moving block bootstrap
// ---------------------------------------------------------------------------

/// exp(mean log(1 + max(R, -0.999999))) - 1 over a series of monthly returns.
double geometric_mean_return(std::span<const double> monthly);

struct BootstrapResult {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t block_len = 0;
    std::size_t n_boot = 0;
    double level = 0.95;
};

/// Paired moving-block bootstrap of geometric_mean_return(a) - geometric_mean_return(b).
BootstrapResult block_bootstrap_ci(std::span<const double> a, std::span<const double> b, std::size_t block_len = 3,
                                   std::size_t n_boot = 2000, double level = 0.95, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Backtest ablations
// ---------------------------------------------------------------------------

struct AblationVariant {
    std::string label;
    MetricsSummary metrics;
    BacktestResult result;
};

/// rigorous (profile as given), standard (fees only), naive (zero cost, caps optionally relaxed).
std::vector<AblationVariant> cost_ablation(const StrategyParams& params, const BarSeries& series,
                                           const FundingSeries& funding, const WindowSpec& window,
                                           const CostProfile& profile, double relax_caps_factor = 1.0,
                                           double rf_annual = 0.03);

struct GateAblation {
    AblationVariant full;
    AblationVariant no_gates;
    std::size_t long_entries_full = 0;
    std::size_t long_entries_no_gates = 0;
};

GateAblation funding_gate_ablation(const StrategyParams& params, const BarSeries& series,
                                   const FundingSeries& funding, const WindowSpec& window,
                                   const CostProfile& profile, double rf_annual = 0.03);

/// Number of bars where exposure goes from <= 0 to > 0.
std::size_t count_long_entries(const BacktestResult& result);

struct UpliftRow {
    std::size_t candidate_id = 0;
    double ann_strict = 0.0;
    double ann_naive = 0.0;
    double uplift = 0.0;
};

struct UpliftReport {
    std::size_t n = 0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double frac_positive = 0.0;
    std::vector<UpliftRow> rows;
};

/// Per candidate: ann(naive t+0) - ann(strict t+1).
UpliftReport semantics_uplift(const std::vector<Candidate>& pool, const BarSeries& series,
                              const FundingSeries& funding, const WindowSpec& window, const CostProfile& profile);

// ---------------------------------------------------------------------------
// Drawdown-bucket exposure overlay
// ---------------------------------------------------------------------------

struct DdBucketPolicy {
    std::vector<double> boundaries{0.0, 0.20, 0.35};  // bucket i covers [b_i, b_{i+1})
    std::vector<double> scales{1.0, 0.5, 0.25};

    void validate() const;
    double scale_for(double drawdown) const;
};

/// Re-derives the ledger with exposure scaled by the bucket of the drawdown
/// observed on the overlay's own net equity through the previous bar.
BacktestResult dd_bucket_overlay(const BacktestResult& result, const DdBucketPolicy& policy);

}  // namespace perpsieve
