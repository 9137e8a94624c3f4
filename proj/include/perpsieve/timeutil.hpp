#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace perpsieve {

// All timestamps are UTC epoch milliseconds.
using Timestamp = std::int64_t;

inline constexpr Timestamp kMsPerHour = 3'600'000;
inline constexpr Timestamp kMsPerDay = 24 * kMsPerHour;

enum class TimestampForm { EpochMillis, Iso8601 };

/// Parses either an integer epoch-millisecond value or an ISO-8601 UTC string
/// ("2021-01-01", "2021-01-01T04:00:00Z", "2021-01-01 04:00:00"). Throws Error on garbage.
Timestamp parse_timestamp(std::string_view text, TimestampForm* form = nullptr);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(Timestamp ts);

/// Month index (year * 12 + month - 1) of the UTC calendar month containing ts.
std::int64_t utc_month_key(Timestamp ts);

/// Days since epoch of the UTC calendar day containing ts.
std::int64_t utc_day_key(Timestamp ts);

inline Timestamp floor_div(Timestamp a, Timestamp b) {
    Timestamp q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace perpsieve
