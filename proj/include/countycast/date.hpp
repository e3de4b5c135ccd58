#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace countycast {

// Civil (proleptic Gregorian) date stored as days since 1970-01-01.
// No time zones; every date is a plain calendar day.
class Date {
public:
    Date() = default;
    Date(int year, int month, int day);

    static Date from_days(std::int64_t days) {
        Date d;
        d.days_ = days;
        return d;
    }

    // "YYYY-MM-DD"
    static std::optional<Date> parse_iso(std::string_view text);
    // "M/D/YY" or "M/D/YYYY" (two-digit years mean 2000-2099)
    static std::optional<Date> parse_mdy(std::string_view text);

    std::int64_t days() const { return days_; }
    int year() const;
    int month() const;
    int day() const;

    // 0 = Sunday ... 6 = Saturday
    int weekday_sun0() const {
        std::int64_t w = (days_ + 4) % 7;
        return static_cast<int>(w < 0 ? w + 7 : w);
    }

    std::string to_iso() const;

    Date operator+(std::int64_t n) const { return from_days(days_ + n); }
    Date operator-(std::int64_t n) const { return from_days(days_ - n); }
    std::int64_t operator-(Date other) const { return days_ - other.days_; }
    Date& operator++() {
        ++days_;
        return *this;
    }

    auto operator<=>(const Date&) const = default;

private:
    std::int64_t days_ = 0;
};

// Days since 1970-01-01 for a civil date (valid across the proleptic range).
std::int64_t days_from_civil(int year, int month, int day);
void civil_from_days(std::int64_t z, int& year, int& month, int& day);

} // namespace countycast
