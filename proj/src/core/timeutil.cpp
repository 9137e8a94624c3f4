#include "perpsieve/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "perpsieve/error.hpp"

namespace perpsieve {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

int to_int(std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) fail(ErrorKind::InvalidArgument, "bad timestamp field");
    return v;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text, TimestampForm* form) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r')) text.remove_suffix(1);
    if (text.empty()) fail(ErrorKind::InvalidArgument, "empty timestamp");

    std::string_view digits = text;
    if (digits.front() == '-') digits.remove_prefix(1);
    if (all_digits(digits)) {
        Timestamp v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            fail(ErrorKind::InvalidArgument, "bad epoch timestamp: " + std::string(text));
        }
        if (form) *form = TimestampForm::EpochMillis;
        return v;
    }

    // YYYY-MM-DD[(T| )HH:MM[:SS][Z|+00:00]]
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        fail(ErrorKind::InvalidArgument, "unrecognized timestamp: " + std::string(text));
    }
    const int y = to_int(text.substr(0, 4));
    const int mo = to_int(text.substr(5, 2));
    const int d = to_int(text.substr(8, 2));
    int hh = 0, mm = 0, ss = 0;
    std::string_view rest = text.substr(10);
    if (!rest.empty()) {
        if (rest.front() != 'T' && rest.front() != ' ') {
            fail(ErrorKind::InvalidArgument, "unrecognized timestamp: " + std::string(text));
        }
        rest.remove_prefix(1);
        if (rest.size() < 5 || rest[2] != ':') fail(ErrorKind::InvalidArgument, "bad time of day: " + std::string(text));
        hh = to_int(rest.substr(0, 2));
        mm = to_int(rest.substr(3, 2));
        rest.remove_prefix(5);
        if (!rest.empty() && rest.front() == ':') {
            if (rest.size() < 3) fail(ErrorKind::InvalidArgument, "bad seconds: " + std::string(text));
            ss = to_int(rest.substr(1, 2));
            rest.remove_prefix(3);
        }
        if (rest == "Z" || rest == "+00:00" || rest.empty()) {
            // UTC
        } else {
            fail(ErrorKind::InvalidArgument, "only UTC timestamps are accepted: " + std::string(text));
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) fail(ErrorKind::InvalidArgument, "invalid date: " + std::string(text));
    const auto tp = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
    if (form) *form = TimestampForm::Iso8601;
    return duration_cast<milliseconds>(tp.time_since_epoch()).count();
}

std::string format_iso8601(Timestamp ts) {
    using namespace std::chrono;
    const sys_time<milliseconds> tp{milliseconds{ts}};
    const auto dp = floor<days>(tp);
    const year_month_day ymd{dp};
    const hh_mm_ss<milliseconds> tod{tp - dp};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()), int(tod.hours().count()), int(tod.minutes().count()),
                  int(tod.seconds().count()));
    return buf;
}

std::int64_t utc_month_key(Timestamp ts) {
    using namespace std::chrono;
    const year_month_day ymd{floor<days>(sys_time<milliseconds>{milliseconds{ts}})};
    return static_cast<std::int64_t>(int(ymd.year())) * 12 + (unsigned(ymd.month()) - 1);
}

std::int64_t utc_day_key(Timestamp ts) { return floor_div(ts, kMsPerDay); }

}  // namespace perpsieve
