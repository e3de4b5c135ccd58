#pragma once

#include <compare>
#include <string>
#include <vector>

#include "countycast/date.hpp"

namespace countycast {

// MMWR epidemiological week: Sunday through Saturday, week 1 of a year being
// the first week with at least four days in that year (equivalently, the week
// containing January 4).
struct EpiWeek {
    int year = 0;  // MMWR year, not necessarily the calendar year of `start`
    int week = 0;  // 1..53
    Date start;    // always a Sunday

    Date end() const { return start + 6; }

    bool contains(Date d) const { return start <= d && d <= end(); }

    EpiWeek operator+(int weeks) const;
    EpiWeek operator-(int weeks) const { return *this + (-weeks); }
    // Signed distance in weeks.
    int operator-(const EpiWeek& other) const {
        return static_cast<int>((start - other.start) / 7);
    }

    auto operator<=>(const EpiWeek& other) const { return start <=> other.start; }
    bool operator==(const EpiWeek& other) const { return start == other.start; }

    // "2020w53"
    std::string label() const;
};

// The unique epi-week containing d. Supported range 1900..2100; anything
// outside throws InputError.
EpiWeek epiweek_of(Date d);

// Consecutive epi-weeks lying entirely inside [first, last].
std::vector<EpiWeek> weeks_covering(Date first, Date last);

} // namespace countycast
