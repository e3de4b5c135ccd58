#include "countycast/date.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace countycast {

namespace {

bool parse_int(std::string_view text, int& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

bool valid_ymd(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int max_day = kDays[static_cast<std::size_t>(m - 1)];
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    if (m == 2 && leap) max_day = 29;
    return d <= max_day;
}

} // namespace

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = static_cast<int>(y + (month <= 2));
}

Date::Date(int year, int month, int day) : days_(days_from_civil(year, month, day)) {}

int Date::year() const {
    int y, m, d;
    civil_from_days(days_, y, m, d);
    return y;
}

int Date::month() const {
    int y, m, d;
    civil_from_days(days_, y, m, d);
    return m;
}

int Date::day() const {
    int y, m, d;
    civil_from_days(days_, y, m, d);
    return d;
}

std::string Date::to_iso() const {
    int y, m, d;
    civil_from_days(days_, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

std::optional<Date> Date::parse_iso(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    int y, m, d;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
        !parse_int(text.substr(8, 2), d)) {
        return std::nullopt;
    }
    if (!valid_ymd(y, m, d)) return std::nullopt;
    return Date(y, m, d);
}

std::optional<Date> Date::parse_mdy(std::string_view text) {
    const auto first = text.find('/');
    if (first == std::string_view::npos) return std::nullopt;
    const auto second = text.find('/', first + 1);
    if (second == std::string_view::npos) return std::nullopt;
    int m, d, y;
    if (!parse_int(text.substr(0, first), m) ||
        !parse_int(text.substr(first + 1, second - first - 1), d) ||
        !parse_int(text.substr(second + 1), y)) {
        return std::nullopt;
    }
    if (y < 100) y += 2000;
    if (!valid_ymd(y, m, d)) return std::nullopt;
    return Date(y, m, d);
}

} // namespace countycast
