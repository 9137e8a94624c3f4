#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perpsieve/timeutil.hpp"

namespace perpsieve {

struct Bar {
    Timestamp ts = 0;  // bar open, UTC
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;

    bool operator==(const Bar&) const = default;
};

struct BarSeries {
    std::vector<Bar> bars;
    int freq_hours = 4;

    std::size_t size() const noexcept { return bars.size(); }
    bool empty() const noexcept { return bars.empty(); }
    Timestamp bar_ms() const noexcept { return static_cast<Timestamp>(freq_hours) * kMsPerHour; }
};

struct FundingPoint {
    Timestamp ts = 0;
    double rate = 0.0;  // decimal per 8h

    bool operator==(const FundingPoint&) const = default;
};

struct FundingSeries {
    std::vector<FundingPoint> points;
    double fallback_rate = 0.0001;
};

// Half-open [start_ts, end_ts).
struct WindowSpec {
    std::string name;
    Timestamp start_ts = 0;
    Timestamp end_ts = 0;

    bool contains(Timestamp ts) const noexcept { return ts >= start_ts && ts < end_ts; }
};

struct SanityViolation {
    Timestamp ts = 0;
    std::string rule;
};

struct ValidationReport {
    std::size_t n_bars = 0;
    std::size_t n_gaps = 0;
    std::vector<Timestamp> gap_locations;
    std::vector<SanityViolation> sanity_violations;
    bool fatal = false;
};

/// Enumerates missing grid slots and OHLCV sanity violations. Never mutates the input.
ValidationReport validate_series(const BarSeries& series, std::size_t gap_tolerance = 0);

/// Throws Error(DataValidation) when the series is not clean enough to trade on.
void require_valid(const BarSeries& series, std::size_t gap_tolerance = 0);

/// Groups bars into dst_hours buckets aligned to UTC midnight. Incomplete groups are dropped.
BarSeries resample(const BarSeries& series, int dst_hours);

/// Carry-forward join: each bar gets the latest observation with ts <= bar open,
/// or the fallback rate before the first observation.
std::vector<double> align_funding(const FundingSeries& funding, const BarSeries& grid);

/// Close-to-close simple returns, length n - 1.
std::vector<double> market_returns(const BarSeries& series);

/// Index range [first, last) of bars inside the window.
struct IndexRange {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const noexcept { return last - first; }
};

IndexRange window_range(const BarSeries& series, const WindowSpec& window);

struct SyntheticFundingSettings {
    double base_rate = 0.0001;     // returned verbatim when price has no drift
    double sensitivity = 0.0001;   // rate per unit of volatility-scaled trend
    int lookback_bars = 42;
    double clamp = 0.0075;
};

/// Deterministic 8h funding baseline derived from closed bars only.
FundingSeries synthetic_funding(const BarSeries& series, const SyntheticFundingSettings& settings = {});

struct SyntheticBarSettings {
    std::size_t n_bars = 2000;
    int freq_hours = 4;
    Timestamp start_ts = 1'577'836'800'000;  // 2020-01-01T00:00:00Z
    double start_price = 10'000.0;
    double drift = 0.0;         // per-bar log drift
    double volatility = 0.01;   // per-bar log-return sd
    std::uint64_t seed = 1;
};

/// Geometric random walk with consistent OHLC envelopes.
BarSeries synthetic_bars(const SyntheticBarSettings& settings);

// CSV I/O. OHLCV header: timestamp,open,high,low,close,volume.
// Funding header: timestamp,funding_rate_8h. Lines starting with '#' are ignored.
BarSeries read_bars_csv(const std::string& path, int freq_hours);
void write_bars_csv(const BarSeries& series, const std::string& path);
FundingSeries read_funding_csv(const std::string& path, double fallback_rate);
void write_funding_csv(const FundingSeries& funding, const std::string& path);

}  // namespace perpsieve
