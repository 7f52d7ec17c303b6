#include "ltv/dates.hpp"

#include <cctype>
#include <cstdio>

namespace ltv {

// Howard Hinnant's civil-date algorithms.
CalendarDay days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<CalendarDay>(era) * 146097 + static_cast<CalendarDay>(doe) - 719468;
}

void civil_from_days(CalendarDay z, int& year, unsigned& month, unsigned& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = doy - (153 * mp + 2) / 5 + 1;
    month = mp + (mp < 10 ? 3 : -9);
    year = static_cast<int>(y + (month <= 2));
}

namespace {

bool all_digits(const std::string& s, size_t from, size_t to) {
    for (size_t i = from; i < to; ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

int to_int(const std::string& s, size_t from, size_t to) {
    int v = 0;
    for (size_t i = from; i < to; ++i) v = v * 10 + (s[i] - '0');
    return v;
}

}  // namespace

std::optional<CalendarDay> parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!all_digits(s, 0, 4) || !all_digits(s, 5, 7) || !all_digits(s, 8, 10)) return std::nullopt;
    int y = to_int(s, 0, 4);
    int m = to_int(s, 5, 7);
    int d = to_int(s, 8, 10);
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    CalendarDay cd = days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    // reject days that do not round-trip (e.g. Feb 30)
    int y2;
    unsigned m2, d2;
    civil_from_days(cd, y2, m2, d2);
    if (y2 != y || static_cast<int>(m2) != m || static_cast<int>(d2) != d) return std::nullopt;
    return cd;
}

std::optional<UtcSeconds> parse_timestamp(const std::string& s) {
    if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z')
        return std::nullopt;
    auto date = parse_date(s.substr(0, 10));
    if (!date) return std::nullopt;
    if (!all_digits(s, 11, 13) || !all_digits(s, 14, 16) || !all_digits(s, 17, 19))
        return std::nullopt;
    int hh = to_int(s, 11, 13);
    int mm = to_int(s, 14, 16);
    int ss = to_int(s, 17, 19);
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    return *date * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_date(CalendarDay d) {
    int y;
    unsigned m, dd;
    civil_from_days(d, y, m, dd);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, dd);
    return buf;
}

std::string format_timestamp(UtcSeconds t) {
    CalendarDay d = day_of(t);
    std::int64_t rem = t - d * 86400;
    int y;
    unsigned m, dd;
    civil_from_days(d, y, m, dd);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, dd,
                  static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

}  // namespace ltv
