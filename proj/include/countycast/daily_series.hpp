#pragma once

#include <Eigen/Dense>

#include "countycast/date.hpp"
#include "countycast/epiweek.hpp"

namespace countycast {

// Contiguous daily series: values[i] observed on start + i. Missing entries
// are flagged in the mask and carry NaN in values.
struct DailySeries {
    Date start;
    Eigen::ArrayXd values;
    Eigen::Array<bool, Eigen::Dynamic, 1> missing;

    DailySeries() = default;
    DailySeries(Date start_date, Eigen::ArrayXd vals);
    static DailySeries all_missing(Date start_date, Eigen::Index n);

    Eigen::Index size() const { return values.size(); }
    Date date_at(Eigen::Index i) const { return start + i; }
    // Index of d, or -1 when d lies outside the series.
    Eigen::Index index_of(Date d) const {
        const std::int64_t off = d - start;
        return (off >= 0 && off < size()) ? static_cast<Eigen::Index>(off) : -1;
    }
    bool defined(Eigen::Index i) const { return i >= 0 && i < size() && !missing[i]; }

    void set(Eigen::Index i, double v) {
        values[i] = v;
        missing[i] = false;
    }
};

// Trailing mean over `window` days. The first window-1 outputs are missing,
// as is any output whose window touches a missing input.
DailySeries rolling_average(const DailySeries& s, int window = 7);

// Mean of the 7 daily values of w; throws MissingDataError if any day of the
// week is missing or outside the series.
double weekly_mean(const DailySeries& s, const EpiWeek& w);

// Ordinary-least-squares slope of the 7 daily values of w against day index
// 0..6; same missing-data contract as weekly_mean.
double weekly_slope(const DailySeries& s, const EpiWeek& w);

} // namespace countycast
