#include "countycast/epiweek.hpp"

#include <cstdio>

#include "countycast/errors.hpp"

namespace countycast {

namespace {

Date sunday_on_or_before(Date d) { return d - d.weekday_sun0(); }

// Sunday starting week 1 of MMWR year y: the week containing January 4.
Date week1_start(int y) { return sunday_on_or_before(Date(y, 1, 4)); }

} // namespace

EpiWeek epiweek_of(Date d) {
    if (d < Date(1900, 1, 1) || d > Date(2100, 12, 31)) {
        throw InputError("date " + d.to_iso() + " outside supported range 1900-01-01..2100-12-31");
    }
    const Date start = sunday_on_or_before(d);
    // The week belongs to the year containing most of it, i.e. the year of
    // its Wednesday.
    const int year = (start + 3).year();
    EpiWeek w;
    w.year = year;
    w.start = start;
    w.week = static_cast<int>((start - week1_start(year)) / 7) + 1;
    return w;
}

EpiWeek EpiWeek::operator+(int weeks) const {
    return epiweek_of(start + static_cast<std::int64_t>(weeks) * 7);
}

std::string EpiWeek::label() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04dw%02d", year, week);
    return buf;
}

std::vector<EpiWeek> weeks_covering(Date first, Date last) {
    std::vector<EpiWeek> weeks;
    EpiWeek w = epiweek_of(first);
    if (w.start < first) w = w + 1;
    while (w.end() <= last) {
        weeks.push_back(w);
        w = w + 1;
    }
    return weeks;
}

} // namespace countycast
