#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "perpsieve/marketdata.hpp"

namespace perpsieve {

// Hyperparameter vector. Zero-valued risk knobs mean "disabled".
struct StrategyParams {
    int ema_fast = 12;                    // [6, 32]
    int ema_slow = 26;                    // [20, 96], > ema_fast
    double ema_threshold = 0.003;         // [0.0005, 0.006], EMA spread units
    double theta_momentum = 0.01;         // > 0, spread scale of the momentum squash
    double w_mom = 0.7;                   // [0, 1]
    int bb_period = 20;                   // [10, 30]
    double bb_dev = 2.0;                  // [1.0, 2.5]
    int min_hold_bars = 1;                // [1, 6]
    int cooldown_hours = 0;               // [0, 8]
    int atr_period = 0;                   // [0, 30]
    double atr_k_sl = 0.0;                // [0, 3]
    double atr_k_tp = 0.0;                // [0, 5]
    double max_exposure_abs = 0.0;        // [0, 5]
    double funding_bias_thr_bps = 0.0;    // [0, 10]
    double funding_bias_k_thr_per_bps = 0.0;  // [0, 0.005]
    bool funding_gates_enabled = true;

    /// Throws Error(InvalidArgument) naming the offending field.
    void validate() const;

    std::size_t warmup_bars() const noexcept;

    bool operator==(const StrategyParams&) const = default;
};

struct ParamBounds {
    double lo;
    double hi;
};

// Closed bounds used both for validation and for the search space.
namespace bounds {
inline constexpr ParamBounds ema_fast{6, 32};
inline constexpr ParamBounds ema_slow{20, 96};
inline constexpr ParamBounds ema_threshold{0.0005, 0.0060};
inline constexpr ParamBounds theta_momentum{0.002, 0.05};
inline constexpr ParamBounds w_mom{0.0, 1.0};
inline constexpr ParamBounds bb_period{10, 30};
inline constexpr ParamBounds bb_dev{1.0, 2.5};
inline constexpr ParamBounds min_hold_bars{1, 6};
inline constexpr ParamBounds cooldown_hours{0, 8};
inline constexpr ParamBounds atr_period{0, 30};
inline constexpr ParamBounds atr_k_sl{0, 3};
inline constexpr ParamBounds atr_k_tp{0, 5};
inline constexpr ParamBounds max_exposure_abs{0, 5};
inline constexpr ParamBounds funding_bias_thr_bps{0, 10};
inline constexpr ParamBounds funding_bias_k_thr_per_bps{0, 0.005};
}  // namespace bounds

struct IndicatorSnapshot {
    double ema_fast_val = 0.0;
    double ema_slow_val = 0.0;
    double bb_z = 0.0;
    double atr_val = 0.0;
    bool ready = false;
};

double momentum_score(double ema_fast_val, double ema_slow_val, double theta_momentum);

double anomaly_score(double bb_z, double bb_dev);

double composite_score(double m, double a, double w_mom);

struct Thresholds {
    double tau_long;
    double tau_short;
};

/// tanh-squashed ema_threshold, on the same scale as the composite score.
double base_threshold(const StrategyParams& params);

Thresholds effective_thresholds(double fr, const StrategyParams& params);

/// Per-bar indicator values; computed causally (bar t uses bars <= t only).
std::vector<IndicatorSnapshot> compute_indicators(const BarSeries& series, const StrategyParams& params);

/// Signal in {-1, 0, +1} at each bar close. `funding` is the per-bar rate the
/// gates observe (aligned to bar opens).
std::vector<std::int8_t> generate_signals(const BarSeries& series, std::span<const double> funding,
                                          const StrategyParams& params);

}  // namespace perpsieve
