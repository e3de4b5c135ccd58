#include "countycast/daily_series.hpp"

#include <limits>

#include "countycast/errors.hpp"

namespace countycast {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Collects the 7 daily values of w, throwing when any is unavailable.
Eigen::Array<double, 7, 1> week_values(const DailySeries& s, const EpiWeek& w) {
    Eigen::Array<double, 7, 1> out;
    for (int k = 0; k < 7; ++k) {
        const Eigen::Index i = s.index_of(w.start + k);
        if (i < 0 || s.missing[i]) {
            throw MissingDataError("missing daily value on " + (w.start + k).to_iso() +
                                   " in week " + w.label());
        }
        out[k] = s.values[i];
    }
    return out;
}

} // namespace

DailySeries::DailySeries(Date start_date, Eigen::ArrayXd vals) {
    start = start_date;
    missing = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(vals.size(), false);
    values = std::move(vals);
}

DailySeries DailySeries::all_missing(Date start_date, Eigen::Index n) {
    DailySeries s;
    s.start = start_date;
    s.values = Eigen::ArrayXd::Constant(n, kNaN);
    s.missing = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true);
    return s;
}

DailySeries rolling_average(const DailySeries& s, int window) {
    if (window < 1) throw InputError("rolling_average window must be >= 1");
    const Eigen::Index n = s.size();
    DailySeries out = DailySeries::all_missing(s.start, n);

    for (Eigen::Index i = window - 1; i < n; ++i) {
        double sum = 0.0;
        bool any_missing = false;
        for (Eigen::Index j = i - window + 1; j <= i; ++j) {
            if (s.missing[j]) {
                any_missing = true;
                break;
            }
            sum += s.values[j];
        }
        if (!any_missing) out.set(i, sum / window);
    }
    return out;
}

double weekly_mean(const DailySeries& s, const EpiWeek& w) {
    return week_values(s, w).mean();
}

double weekly_slope(const DailySeries& s, const EpiWeek& w) {
    const auto y = week_values(s, w);
    // x = 0..6 centered at 3; sum((x-3)^2) = 28 and sum(x-3) = 0, so the
    // intercept term drops out of the covariance.
    double cov = 0.0;
    for (int k = 0; k < 7; ++k) cov += (k - 3) * y[k];
    return cov / 28.0;
}

} // namespace countycast
