#include "perpsieve/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "perpsieve/csv.hpp"
#include "perpsieve/error.hpp"
#include "perpsieve/rng.hpp"
#include "perpsieve/stats.hpp"

namespace perpsieve {

namespace {

constexpr Timestamp kFundingPeriodMs = 8 * kMsPerHour;

void check_freq(int freq_hours) {
    if (freq_hours <= 0) fail(ErrorKind::InvalidArgument, "bar frequency must be a positive number of hours");
}

}  // namespace

ValidationReport validate_series(const BarSeries& series, std::size_t gap_tolerance) {
    check_freq(series.freq_hours);
    if (series.empty()) fail(ErrorKind::InvalidArgument, "cannot validate an empty series");

    ValidationReport report;
    report.n_bars = series.size();
    const Timestamp step = series.bar_ms();

    for (std::size_t i = 0; i < series.size(); ++i) {
        const Bar& b = series.bars[i];
        auto violate = [&](const char* rule) { report.sanity_violations.push_back({b.ts, rule}); };

        const bool finite = std::isfinite(b.open) && std::isfinite(b.high) && std::isfinite(b.low) &&
                            std::isfinite(b.close) && std::isfinite(b.volume);
        if (!finite) {
            violate("non_finite_value");
        } else {
            if (b.open <= 0 || b.high <= 0 || b.low <= 0 || b.close <= 0) violate("non_positive_price");
            if (b.volume < 0) violate("negative_volume");
            if (b.high < std::max({b.open, b.close, b.low})) violate("high_below_body");
            if (b.low > std::min({b.open, b.close, b.high})) violate("low_above_body");
        }

        if (i == 0) continue;
        const Timestamp prev = series.bars[i - 1].ts;
        if (b.ts == prev) {
            violate("duplicate_timestamp");
        } else if (b.ts < prev) {
            violate("non_increasing_timestamp");
        } else if ((b.ts - prev) % step != 0) {
            violate("off_grid_spacing");
        } else {
            for (Timestamp slot = prev + step; slot < b.ts; slot += step) {
                report.gap_locations.push_back(slot);
                ++report.n_gaps;
            }
        }
    }
    report.fatal = report.n_gaps > gap_tolerance || !report.sanity_violations.empty();
    return report;
}

void require_valid(const BarSeries& series, std::size_t gap_tolerance) {
    const ValidationReport r = validate_series(series, gap_tolerance);
    if (!r.fatal) return;
    std::string what = "data integrity failure: " + std::to_string(r.n_gaps) + " missing bar(s)";
    if (!r.gap_locations.empty()) what += " (first at " + format_iso8601(r.gap_locations.front()) + ")";
    if (!r.sanity_violations.empty()) {
        what += ", " + std::to_string(r.sanity_violations.size()) + " sanity violation(s) (first: " +
                r.sanity_violations.front().rule + " at " + format_iso8601(r.sanity_violations.front().ts) + ")";
    }
    fail(ErrorKind::DataValidation, what);
}

BarSeries resample(const BarSeries& series, int dst_hours) {
    check_freq(series.freq_hours);
    if (dst_hours <= 0 || dst_hours % series.freq_hours != 0) {
        fail(ErrorKind::InvalidArgument, "target frequency " + std::to_string(dst_hours) +
                                             "h is not a multiple of " + std::to_string(series.freq_hours) + "h");
    }
    const std::size_t ratio = static_cast<std::size_t>(dst_hours / series.freq_hours);
    const Timestamp dst_ms = static_cast<Timestamp>(dst_hours) * kMsPerHour;

    auto group_start = [&](Timestamp ts) {
        if (dst_ms > kMsPerDay) return floor_div(ts, dst_ms) * dst_ms;
        const Timestamp day = floor_div(ts, kMsPerDay) * kMsPerDay;
        return day + floor_div(ts - day, dst_ms) * dst_ms;
    };

    BarSeries out;
    out.freq_hours = dst_hours;
    std::size_t i = 0;
    while (i < series.size()) {
        const Timestamp g = group_start(series.bars[i].ts);
        std::size_t j = i;
        Bar agg = series.bars[i];
        agg.ts = g;
        agg.volume = 0.0;
        for (; j < series.size() && group_start(series.bars[j].ts) == g; ++j) {
            const Bar& b = series.bars[j];
            agg.high = std::max(agg.high, b.high);
            agg.low = std::min(agg.low, b.low);
            agg.close = b.close;
            agg.volume += b.volume;
        }
        if (j - i == ratio) out.bars.push_back(agg);
        i = j;
    }
    return out;
}

std::vector<double> align_funding(const FundingSeries& funding, const BarSeries& grid) {
    std::vector<double> rates(grid.size(), funding.fallback_rate);
    std::size_t k = 0;
    std::optional<double> current;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Timestamp open = grid.bars[i].ts;
        while (k < funding.points.size() && funding.points[k].ts <= open) {
            if (k > 0 && funding.points[k].ts <= funding.points[k - 1].ts) {
                fail(ErrorKind::DataValidation, "funding timestamps must be strictly increasing");
            }
            current = funding.points[k].rate;
            ++k;
        }
        if (current) rates[i] = *current;
    }
    return rates;
}

std::vector<double> market_returns(const BarSeries& series) {
    std::vector<double> r;
    if (series.size() < 2) return r;
    r.reserve(series.size() - 1);
    for (std::size_t i = 1; i < series.size(); ++i) {
        r.push_back(series.bars[i].close / series.bars[i - 1].close - 1.0);
    }
    return r;
}

IndexRange window_range(const BarSeries& series, const WindowSpec& window) {
    if (window.start_ts >= window.end_ts) fail(ErrorKind::InvalidArgument, "window '" + window.name + "' is empty");
    const auto first = std::lower_bound(series.bars.begin(), series.bars.end(), window.start_ts,
                                        [](const Bar& b, Timestamp t) { return b.ts < t; });
    const auto last = std::lower_bound(series.bars.begin(), series.bars.end(), window.end_ts,
                                       [](const Bar& b, Timestamp t) { return b.ts < t; });
    return {static_cast<std::size_t>(first - series.bars.begin()), static_cast<std::size_t>(last - series.bars.begin())};
}

FundingSeries synthetic_funding(const BarSeries& series, const SyntheticFundingSettings& settings) {
    check_freq(series.freq_hours);
    if (settings.lookback_bars < 2) fail(ErrorKind::InvalidArgument, "synthetic funding lookback must be >= 2");
    if (!(settings.clamp >= 0.0)) fail(ErrorKind::InvalidArgument, "synthetic funding clamp must be >= 0");

    FundingSeries out;
    out.fallback_rate = settings.base_rate;
    if (series.empty()) return out;

    const Timestamp bar_ms = series.bar_ms();
    const Timestamp first = series.bars.front().ts;
    const Timestamp last = series.bars.back().ts;
    const auto lookback = static_cast<std::size_t>(settings.lookback_bars);

    std::size_t closed = 0;  // bars whose close time is <= T
    for (Timestamp t = floor_div(first + kFundingPeriodMs - 1, kFundingPeriodMs) * kFundingPeriodMs; t <= last;
         t += kFundingPeriodMs) {
        while (closed < series.size() && series.bars[closed].ts + bar_ms <= t) ++closed;

        double rate = settings.base_rate;
        if (closed > lookback) {
            const std::size_t k = closed - 1;
            const double trend = std::log(series.bars[k].close / series.bars[k - lookback].close);
            std::vector<double> lr;
            lr.reserve(lookback);
            for (std::size_t i = k - lookback + 1; i <= k; ++i) {
                lr.push_back(std::log(series.bars[i].close / series.bars[i - 1].close));
            }
            const double scale = stats::sample_sd(lr) * std::sqrt(static_cast<double>(lookback));
            double z = 0.0;
            if (trend != 0.0) z = scale > 1e-12 ? trend / scale : std::copysign(1e12, trend);
            rate = settings.base_rate + settings.sensitivity * z;
        }
        out.points.push_back({t, std::clamp(rate, -settings.clamp, settings.clamp)});
    }
    return out;
}

BarSeries synthetic_bars(const SyntheticBarSettings& s) {
    check_freq(s.freq_hours);
    if (!(s.start_price > 0.0)) fail(ErrorKind::InvalidArgument, "start price must be positive");
    if (!(s.volatility >= 0.0)) fail(ErrorKind::InvalidArgument, "volatility must be >= 0");
    BarSeries out;
    out.freq_hours = s.freq_hours;
    out.bars.reserve(s.n_bars);
    Rng rng(derive_seed(s.seed, "synthetic_bars"));
    double prev_close = s.start_price;
    for (std::size_t i = 0; i < s.n_bars; ++i) {
        Bar b;
        b.ts = s.start_ts + static_cast<Timestamp>(i) * out.bar_ms();
        b.open = prev_close;
        b.close = b.open * std::exp(s.drift + s.volatility * rng.normal());
        const double up = std::abs(rng.normal()) * s.volatility * 0.5;
        const double down = std::abs(rng.normal()) * s.volatility * 0.5;
        b.high = std::max(b.open, b.close) * std::exp(up);
        b.low = std::min(b.open, b.close) * std::exp(-down);
        b.volume = 100.0 * std::exp(0.3 * rng.normal());
        prev_close = b.close;
        out.bars.push_back(b);
    }
    return out;
}

BarSeries read_bars_csv(const std::string& path, int freq_hours) {
    check_freq(freq_hours);
    csv::Reader reader(path, "timestamp,open,high,low,close,volume");
    BarSeries out;
    out.freq_hours = freq_hours;
    std::vector<std::string_view> f;
    std::optional<TimestampForm> form;
    while (reader.next(f)) {
        if (f.size() != 6) {
            fail(ErrorKind::Schema, path + ":" + std::to_string(reader.line_number()) + ": expected 6 fields");
        }
        TimestampForm this_form;
        Bar b;
        b.ts = parse_timestamp(f[0], &this_form);
        if (form && *form != this_form) {
            fail(ErrorKind::Schema, path + ":" + std::to_string(reader.line_number()) + ": mixed timestamp forms");
        }
        form = this_form;
        b.open = csv::parse_double(f[1]);
        b.high = csv::parse_double(f[2]);
        b.low = csv::parse_double(f[3]);
        b.close = csv::parse_double(f[4]);
        b.volume = csv::parse_double(f[5]);
        out.bars.push_back(b);
    }
    return out;
}

void write_bars_csv(const BarSeries& series, const std::string& path) {
    auto out = csv::open_for_write(path, "timestamp,open,high,low,close,volume");
    for (const Bar& b : series.bars) {
        out << b.ts << ',' << csv::format_double(b.open) << ',' << csv::format_double(b.high) << ','
            << csv::format_double(b.low) << ',' << csv::format_double(b.close) << ',' << csv::format_double(b.volume)
            << '\n';
    }
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

FundingSeries read_funding_csv(const std::string& path, double fallback_rate) {
    csv::Reader reader(path, "timestamp,funding_rate_8h");
    FundingSeries out;
    out.fallback_rate = fallback_rate;
    std::vector<std::string_view> f;
    std::optional<TimestampForm> form;
    while (reader.next(f)) {
        if (f.size() != 2) {
            fail(ErrorKind::Schema, path + ":" + std::to_string(reader.line_number()) + ": expected 2 fields");
        }
        TimestampForm this_form;
        FundingPoint p{parse_timestamp(f[0], &this_form), csv::parse_double(f[1])};
        if (form && *form != this_form) {
            fail(ErrorKind::Schema, path + ":" + std::to_string(reader.line_number()) + ": mixed timestamp forms");
        }
        form = this_form;
        if (!std::isfinite(p.rate)) fail(ErrorKind::DataValidation, path + ": non-finite funding rate");
        if (!out.points.empty() && p.ts <= out.points.back().ts) {
            fail(ErrorKind::DataValidation, path + ": funding timestamps must be strictly increasing");
        }
        out.points.push_back(p);
    }
    return out;
}

void write_funding_csv(const FundingSeries& funding, const std::string& path) {
    auto out = csv::open_for_write(path, "timestamp,funding_rate_8h");
    for (const FundingPoint& p : funding.points) out << p.ts << ',' << csv::format_double(p.rate) << '\n';
    if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

}  // namespace perpsieve
