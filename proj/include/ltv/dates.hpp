#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ltv {

// Calendar day as a count of days since 1970-01-01 (UTC). All calendar
// arithmetic in this project is done in UTC.
using CalendarDay = std::int64_t;

// UTC instant with second resolution, as seconds since the epoch.
using UtcSeconds = std::int64_t;

CalendarDay days_from_civil(int year, unsigned month, unsigned day);
void civil_from_days(CalendarDay z, int& year, unsigned& month, unsigned& day);

inline CalendarDay day_of(UtcSeconds t) {
    // floor division, valid for pre-epoch instants too
    const std::int64_t secs_per_day = 86400;
    std::int64_t d = t / secs_per_day;
    if (t % secs_per_day < 0) --d;
    return d;
}

// Parses "YYYY-MM-DD". Returns nullopt on malformed input.
std::optional<CalendarDay> parse_date(const std::string& s);

// Parses "YYYY-MM-DDTHH:MM:SSZ". Returns nullopt on malformed input.
std::optional<UtcSeconds> parse_timestamp(const std::string& s);

std::string format_date(CalendarDay d);
std::string format_timestamp(UtcSeconds t);

}  // namespace ltv
