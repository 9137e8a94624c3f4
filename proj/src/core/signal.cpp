#include "perpsieve/signal.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "perpsieve/error.hpp"

namespace perpsieve {

namespace {

template <typename T>
void check_range(T value, ParamBounds b, const char* name) {
    const double v = static_cast<double>(value);
    if (!(v >= b.lo && v <= b.hi)) {
        fail(ErrorKind::InvalidArgument, std::string(name) + "=" + std::to_string(v) + " outside [" +
                                             std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
    }
}

}  // namespace

void StrategyParams::validate() const {
    check_range(ema_fast, bounds::ema_fast, "ema_fast");
    check_range(ema_slow, bounds::ema_slow, "ema_slow");
    if (ema_fast >= ema_slow) fail(ErrorKind::InvalidArgument, "ema_fast must be shorter than ema_slow");
    check_range(ema_threshold, bounds::ema_threshold, "ema_threshold");
    if (!(theta_momentum > 0.0) || !std::isfinite(theta_momentum)) {
        fail(ErrorKind::InvalidArgument, "theta_momentum must be > 0");
    }
    check_range(w_mom, bounds::w_mom, "w_mom");
    check_range(bb_period, bounds::bb_period, "bb_period");
    check_range(bb_dev, bounds::bb_dev, "bb_dev");
    check_range(min_hold_bars, bounds::min_hold_bars, "min_hold_bars");
    check_range(cooldown_hours, bounds::cooldown_hours, "cooldown_hours");
    check_range(atr_period, bounds::atr_period, "atr_period");
    check_range(atr_k_sl, bounds::atr_k_sl, "atr_k_sl");
    check_range(atr_k_tp, bounds::atr_k_tp, "atr_k_tp");
    check_range(max_exposure_abs, bounds::max_exposure_abs, "max_exposure_abs");
    check_range(funding_bias_thr_bps, bounds::funding_bias_thr_bps, "funding_bias_thr_bps");
    check_range(funding_bias_k_thr_per_bps, bounds::funding_bias_k_thr_per_bps, "funding_bias_k_thr_per_bps");
}

std::size_t StrategyParams::warmup_bars() const noexcept {
    return static_cast<std::size_t>(std::max({ema_slow, bb_period, atr_period, 1}));
}

double momentum_score(double ema_fast_val, double ema_slow_val, double theta_momentum) {
    return 0.5 * (1.0 + std::tanh((ema_fast_val - ema_slow_val) / (theta_momentum * ema_slow_val)));
}

double anomaly_score(double bb_z, double bb_dev) { return 0.5 * (1.0 - std::tanh(bb_z / bb_dev)); }

double composite_score(double m, double a, double w_mom) { return w_mom * m + (1.0 - w_mom) * a; }

double base_threshold(const StrategyParams& params) {
    return 0.5 * (1.0 + std::tanh(params.ema_threshold / params.theta_momentum));
}

Thresholds effective_thresholds(double fr, const StrategyParams& params) {
    const double base = base_threshold(params);
    // Table units are per bps; the slope applies per 1.0 of decimal funding.
    const double kappa = params.funding_bias_k_thr_per_bps * 10000.0;
    const double excess = std::max(std::abs(fr) - params.funding_bias_thr_bps / 10000.0, 0.0);
    Thresholds t{base, base};
    if (fr > 0.0) t.tau_long = std::min(base + kappa * excess, 1.0);
    if (fr < 0.0) t.tau_short = std::min(base + kappa * excess, 1.0);
    return t;
}

std::vector<IndicatorSnapshot> compute_indicators(const BarSeries& series, const StrategyParams& params) {
    const std::size_t n = series.size();
    std::vector<IndicatorSnapshot> out(n);
    if (n == 0) return out;

    const double a_fast = 2.0 / (params.ema_fast + 1.0);
    const double a_slow = 2.0 / (params.ema_slow + 1.0);
    const auto bb = static_cast<std::size_t>(params.bb_period);
    const auto atr_n = static_cast<std::size_t>(params.atr_period);
    const std::size_t warmup = params.warmup_bars();

    std::vector<double> tr(n);
    double fast = series.bars[0].close;
    double slow = fast;
    for (std::size_t t = 0; t < n; ++t) {
        const Bar& b = series.bars[t];
        if (t > 0) {
            fast = a_fast * b.close + (1.0 - a_fast) * fast;
            slow = a_slow * b.close + (1.0 - a_slow) * slow;
            const double pc = series.bars[t - 1].close;
            tr[t] = std::max({b.high - b.low, std::abs(b.high - pc), std::abs(b.low - pc)});
        } else {
            tr[t] = b.high - b.low;
        }

        IndicatorSnapshot& s = out[t];
        s.ema_fast_val = fast;
        s.ema_slow_val = slow;
        if (t + 1 >= bb) {
            double sum = 0.0;
            for (std::size_t k = t + 1 - bb; k <= t; ++k) sum += series.bars[k].close;
            const double mean = sum / static_cast<double>(bb);
            double ss = 0.0;
            for (std::size_t k = t + 1 - bb; k <= t; ++k) {
                const double d = series.bars[k].close - mean;
                ss += d * d;
            }
            const double sd = std::sqrt(ss / static_cast<double>(bb));
            s.bb_z = sd > 0.0 ? (b.close - mean) / sd : 0.0;
        }
        if (atr_n > 0 && t + 1 >= atr_n) {
            double sum = 0.0;
            for (std::size_t k = t + 1 - atr_n; k <= t; ++k) sum += tr[k];
            s.atr_val = sum / static_cast<double>(atr_n);
        }
        s.ready = t + 1 >= warmup;
    }
    return out;
}

std::vector<std::int8_t> generate_signals(const BarSeries& series, std::span<const double> funding,
                                          const StrategyParams& params) {
    params.validate();
    if (funding.size() != series.size()) {
        fail(ErrorKind::InvalidArgument, "funding sequence length does not match the bar series");
    }
    const std::size_t n = series.size();
    std::vector<std::int8_t> signals(n, 0);
    const std::vector<IndicatorSnapshot> ind = compute_indicators(series, params);
    const double tau_base = base_threshold(params);
    const bool atr_on = params.atr_period > 0;
    const auto cooldown_ms = static_cast<Timestamp>(params.cooldown_hours) * kMsPerHour;

    int pos = 0;
    int held = 0;
    double entry_close = 0.0;
    int rearm_blocked = 0;  // direction closed by an ATR exit, re-armed once the base-level signal leaves it
    std::optional<Timestamp> last_exit_close;

    for (std::size_t t = 0; t < n; ++t) {
        const IndicatorSnapshot& s = ind[t];
        if (!s.ready) continue;
        const Bar& b = series.bars[t];
        const Timestamp close_ts = b.ts + series.bar_ms();

        const double m = momentum_score(s.ema_fast_val, s.ema_slow_val, params.theta_momentum);
        const double a = anomaly_score(s.bb_z, params.bb_dev);
        const double c = composite_score(m, a, params.w_mom);
        const Thresholds tau =
            params.funding_gates_enabled ? effective_thresholds(funding[t], params) : Thresholds{tau_base, tau_base};
        // The funding increment raises entry thresholds; an open position is held against the base level.
        const double tl = pos == 1 ? tau_base : tau.tau_long;
        const double ts = pos == -1 ? tau_base : tau.tau_short;
        int raw = 0;
        if (c >= tl) {
            raw = 1;
        } else if (c <= 1.0 - ts) {
            raw = -1;
        }
        if (rearm_blocked == 1 && c < tau_base) rearm_blocked = 0;
        if (rearm_blocked == -1 && c > 1.0 - tau_base) rearm_blocked = 0;

        int next = raw;
        if (pos != 0) {
            bool atr_exit = false;
            if (atr_on && s.atr_val > 0.0) {
                const double excursion = pos * (b.close - entry_close);
                if (params.atr_k_sl > 0.0 && -excursion > params.atr_k_sl * s.atr_val) atr_exit = true;
                if (params.atr_k_tp > 0.0 && excursion > params.atr_k_tp * s.atr_val) atr_exit = true;
            }
            if (atr_exit) {
                next = 0;
                rearm_blocked = pos;
            } else if (held < params.min_hold_bars) {
                next = pos;
            }
        }
        if (next != 0 && next == rearm_blocked) next = 0;

        if (next != 0 && next != pos && cooldown_ms > 0) {
            const std::optional<Timestamp> exit_ts = pos != 0 ? std::optional<Timestamp>(close_ts) : last_exit_close;
            if (exit_ts && close_ts - *exit_ts < cooldown_ms) next = 0;
        }

        if (next != pos) {
            if (pos != 0) last_exit_close = close_ts;
            if (next != 0) {
                entry_close = b.close;
                held = 1;
            } else {
                held = 0;
            }
        } else if (next != 0) {
            ++held;
        }
        pos = next;
        signals[t] = static_cast<std::int8_t>(next);
    }
    return signals;
}

}  // namespace perpsieve
