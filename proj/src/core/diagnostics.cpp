#include "perpsieve/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "perpsieve/error.hpp"
#include "perpsieve/rng.hpp"
#include "perpsieve/stats.hpp"

namespace perpsieve {

namespace {
constexpr double kEulerGamma = 0.5772156649015329;
}

double expected_max_sharpe(std::size_t n_trials, double sr_variance) {
    if (n_trials == 0) fail(ErrorKind::InvalidArgument, "n_trials must be >= 1");
    if (!(sr_variance >= 0.0) || !std::isfinite(sr_variance)) {
        fail(ErrorKind::InvalidArgument, "sharpe variance must be finite and >= 0");
    }
    if (n_trials == 1) return 0.0;
    const double n = static_cast<double>(n_trials);
    const double z1 = stats::normal_quantile(1.0 - 1.0 / n);
    const double z2 = stats::normal_quantile(1.0 - 1.0 / (n * std::numbers::e));
    return std::sqrt(sr_variance) * ((1.0 - kEulerGamma) * z1 + kEulerGamma * z2);
}

double deflated_sharpe(double sr_hat, std::size_t n_obs, double skew, double kurtosis, std::size_t n_trials,
                       double sr_variance) {
    if (n_obs < 2) fail(ErrorKind::InvalidArgument, "deflated sharpe needs n_obs >= 2");
    if (!std::isfinite(sr_hat) || !std::isfinite(skew) || !std::isfinite(kurtosis)) {
        fail(ErrorKind::InvalidArgument, "deflated sharpe inputs must be finite");
    }
    const double per_bar = std::sqrt(kAnnualizationFactor);
    const double sr0 = expected_max_sharpe(n_trials, sr_variance) / per_bar;
    const double sr = sr_hat / per_bar;
    const double denom = 1.0 - skew * sr + (kurtosis - 1.0) / 4.0 * sr * sr;
    if (!(denom > 0.0)) fail(ErrorKind::Numerical, "deflated sharpe denominator is not positive");
    return stats::normal_cdf((sr - sr0) * std::sqrt(static_cast<double>(n_obs - 1)) / std::sqrt(denom));
}

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

PboResult cscv_pbo(const ReturnMatrix& m, std::size_t n_segments) {
    if (n_segments < 2 || n_segments % 2 != 0) fail(ErrorKind::InvalidArgument, "n_segments must be even and >= 2");
    if (m.rows < 2) fail(ErrorKind::InvalidArgument, "PBO needs at least two candidates");
    if (m.values.size() != m.rows * m.cols) fail(ErrorKind::InvalidArgument, "return matrix is not rectangular");
    if (m.cols < n_segments || m.cols % n_segments != 0) {
        fail(ErrorKind::InvalidArgument, "columns must split into n_segments equal blocks");
    }
    for (double v : m.values) {
        if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "return matrix has non-finite entries");
    }

    const std::size_t seg_len = m.cols / n_segments;
    // Per-segment sums; segments have equal length so sums rank like means.
    std::vector<double> seg(m.rows * n_segments, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t s = 0; s < n_segments; ++s) {
            double sum = 0.0;
            for (std::size_t c = s * seg_len; c < (s + 1) * seg_len; ++c) sum += m.at(r, c);
            seg[r * n_segments + s] = sum;
        }
    }

    PboResult out;
    const std::size_t half = n_segments / 2;
    std::vector<bool> pick(n_segments, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(half), true);
    std::vector<double> is(m.rows), oos(m.rows);
    std::size_t below = 0;
    const double n = static_cast<double>(m.rows);
    do {
        for (std::size_t r = 0; r < m.rows; ++r) {
            double a = 0.0, b = 0.0;
            for (std::size_t s = 0; s < n_segments; ++s) (pick[s] ? a : b) += seg[r * n_segments + s];
            is[r] = a / static_cast<double>(half * seg_len);
            oos[r] = b / static_cast<double>(half * seg_len);
        }
        const std::size_t winner = static_cast<std::size_t>(std::max_element(is.begin(), is.end()) - is.begin());
        double rank = 1.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            if (r == winner) continue;
            if (oos[r] < oos[winner]) rank += 1.0;
            else if (oos[r] == oos[winner]) rank += 0.5;
        }
        const double omega = rank / (n + 1.0);
        const double logit = std::log(omega / (1.0 - omega));
        out.logits.push_back(logit);
        if (logit <= 0.0) ++below;
    } while (std::prev_permutation(pick.begin(), pick.end()));

    out.n_splits = out.logits.size();
    out.pbo = static_cast<double>(below) / static_cast<double>(out.n_splits);
    return out;
}

double geometric_mean_return(std::span<const double> monthly) {
    if (monthly.empty()) return 0.0;
    double sum_log = 0.0;
    for (double r : monthly) sum_log += std::log1p(std::max(r, -0.999999));
    return std::expm1(sum_log / static_cast<double>(monthly.size()));
}

BootstrapResult block_bootstrap_ci(std::span<const double> a, std::span<const double> b, std::size_t block_len,
                                   std::size_t n_boot, double level, std::uint64_t seed) {
    if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "bootstrap series must have equal length");
    if (block_len == 0 || a.size() < block_len) {
        fail(ErrorKind::InvalidArgument, "block length must be in [1, series length]");
    }
    if (n_boot == 0) fail(ErrorKind::InvalidArgument, "n_boot must be >= 1");
    if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "confidence level must be in (0, 1)");

    BootstrapResult out;
    out.block_len = block_len;
    out.n_boot = n_boot;
    out.level = level;
    out.estimate = geometric_mean_return(a) - geometric_mean_return(b);

    const std::size_t n = a.size();
    const std::size_t n_blocks = (n + block_len - 1) / block_len;
    const std::size_t n_starts = n - block_len + 1;
    Rng rng(derive_seed(seed, "diagnostics.bootstrap", 0));
    std::vector<double> ra(n), rb(n), deltas(n_boot);
    for (std::size_t k = 0; k < n_boot; ++k) {
        std::size_t filled = 0;
        for (std::size_t blk = 0; blk < n_blocks; ++blk) {
            const std::size_t start = rng.below(n_starts);
            for (std::size_t j = 0; j < block_len && filled < n; ++j, ++filled) {
                ra[filled] = a[start + j];
                rb[filled] = b[start + j];
            }
        }
        deltas[k] = geometric_mean_return(ra) - geometric_mean_return(rb);
    }
    std::sort(deltas.begin(), deltas.end());
    out.lower = stats::quantile_sorted(deltas, (1.0 - level) / 2.0);
    out.upper = stats::quantile_sorted(deltas, (1.0 + level) / 2.0);
    return out;
}

namespace {

AblationVariant run_variant(std::string label, const StrategyParams& params, const BarSeries& series,
                            const FundingSeries& funding, const WindowSpec& window, const CostProfile& profile,
                            double rf_annual) {
    AblationVariant v;
    v.label = std::move(label);
    v.result = run_backtest(series, funding, params, profile, window, Semantics::StrictT1);
    v.metrics = metrics(v.result, rf_annual);
    return v;
}

}  // namespace

std::vector<AblationVariant> cost_ablation(const StrategyParams& params, const BarSeries& series,
                                           const FundingSeries& funding, const WindowSpec& window,
                                           const CostProfile& profile, double relax_caps_factor, double rf_annual) {
    std::vector<AblationVariant> out;
    out.push_back(run_variant("rigorous", params, series, funding, window, profile, rf_annual));
    out.push_back(run_variant("standard", params, series, funding, window, fee_only(profile), rf_annual));
    out.push_back(
        run_variant("naive", params, series, funding, window, zero_cost(profile, relax_caps_factor), rf_annual));
    return out;
}

std::size_t count_long_entries(const BacktestResult& result) {
    std::size_t n = 0;
    double prev = 0.0;
    for (const auto& row : result.ledger) {
        if (prev <= 0.0 && row.exposure > 0.0) ++n;
        prev = row.exposure;
    }
    return n;
}

GateAblation funding_gate_ablation(const StrategyParams& params, const BarSeries& series,
                                   const FundingSeries& funding, const WindowSpec& window,
                                   const CostProfile& profile, double rf_annual) {
    StrategyParams gated = params;
    gated.funding_gates_enabled = true;
    StrategyParams ungated = params;
    ungated.funding_gates_enabled = false;
    GateAblation out;
    out.full = run_variant("gates_on", gated, series, funding, window, profile, rf_annual);
    out.no_gates = run_variant("gates_off", ungated, series, funding, window, profile, rf_annual);
    out.long_entries_full = count_long_entries(out.full.result);
    out.long_entries_no_gates = count_long_entries(out.no_gates.result);
    return out;
}

UpliftReport semantics_uplift(const std::vector<Candidate>& pool, const BarSeries& series,
                              const FundingSeries& funding, const WindowSpec& window, const CostProfile& profile) {
    if (pool.empty()) fail(ErrorKind::InvalidArgument, "uplift needs a non-empty pool");
    UpliftReport rep;
    std::vector<double> deltas;
    for (const Candidate& c : pool) {
        UpliftRow row;
        row.candidate_id = c.id;
        row.ann_strict = metrics(run_backtest(series, funding, c.params, profile, window, Semantics::StrictT1), 0.0)
                             .ann_return;
        row.ann_naive = metrics(run_backtest(series, funding, c.params, profile, window, Semantics::NaiveT0), 0.0)
                            .ann_return;
        row.uplift = row.ann_naive - row.ann_strict;
        deltas.push_back(row.uplift);
        rep.rows.push_back(row);
    }
    rep.n = deltas.size();
    std::sort(deltas.begin(), deltas.end());
    rep.p25 = stats::quantile_sorted(deltas, 0.25);
    rep.median = stats::quantile_sorted(deltas, 0.5);
    rep.p75 = stats::quantile_sorted(deltas, 0.75);
    const auto positive = std::count_if(deltas.begin(), deltas.end(), [](double d) { return d > 0.0; });
    rep.frac_positive = static_cast<double>(positive) / static_cast<double>(rep.n);
    return rep;
}

void DdBucketPolicy::validate() const {
    if (boundaries.empty() || boundaries.size() != scales.size()) {
        fail(ErrorKind::InvalidArgument, "dd bucket policy needs one scale per boundary");
    }
    if (boundaries.front() != 0.0) fail(ErrorKind::InvalidArgument, "first dd bucket boundary must be 0");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        if (!(boundaries[i] > boundaries[i - 1])) {
            fail(ErrorKind::InvalidArgument, "dd bucket boundaries must be strictly increasing");
        }
    }
    for (double s : scales) {
        if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::InvalidArgument, "dd bucket scales must lie in [0, 1]");
    }
}

double DdBucketPolicy::scale_for(double drawdown) const {
    std::size_t i = 0;
    while (i + 1 < boundaries.size() && drawdown >= boundaries[i + 1]) ++i;
    return scales[i];
}

BacktestResult dd_bucket_overlay(const BacktestResult& result, const DdBucketPolicy& policy) {
    policy.validate();
    if (result.funding_rates.size() != result.ledger.size()) {
        fail(ErrorKind::InvalidArgument, "backtest result lacks per-bar funding rates");
    }
    BacktestResult out = result;
    const double bar_hours = static_cast<double>(result.bar_hours);
    double equity = 1.0;
    double peak = 1.0;
    double prev_exposure = 0.0;
    for (std::size_t t = 0; t < out.ledger.size(); ++t) {
        LedgerRow& row = out.ledger[t];
        const double dd = equity > 0.0 ? 1.0 - equity / peak : 1.0;
        row.exposure = policy.scale_for(dd) * result.ledger[t].exposure;
        row.r_raw = row.exposure * row.r_mkt;
        const CostBreakdown c = bar_costs(prev_exposure, row.exposure, result.funding_rates[t], bar_hours, result.profile);
        row.c_fee = c.fee;
        row.c_slip = c.slip;
        row.c_fund = c.funding;
        row.r_net = row.r_raw - row.c_fee - row.c_slip - row.c_fund;
        prev_exposure = row.exposure;
        equity *= 1.0 + row.r_net;
        peak = std::max(peak, equity);
    }
    return out;
}

}  // namespace perpsieve
