#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "countycast/epiweek.hpp"
#include "countycast/panel.hpp"

namespace countycast {

// Model input channels, one column each, in fixed order.
enum FeatureColumn : int {
    kNewWeeklyIncidence = 0,
    kMonthlyMeanCumulative,
    kStayPutMean,
    kStayPutSlope,
    kMovementMean,
    kMovementSlope,
    kSpcWeeklyChange,
    kSpcMonthlyMean,
    kTempMinWeekly,
    kTempMaxWeekly,
};
inline constexpr int kFeatureCount = 10;
extern const std::array<std::string_view, kFeatureCount> kFeatureNames;

// Epi-week-aligned feature table. A (county, week) row exists only when all
// ten features are defined; weekly incidence is tracked separately so targets
// and the persistence baseline stay available even when a mobility or weather
// gap knocks out the full row.
struct FeatureTable {
    std::vector<EpiWeek> weeks;  // consecutive
    struct CountyRows {
        Eigen::MatrixXd values;                        // weeks x 10, NaN where undefined
        Eigen::Array<bool, Eigen::Dynamic, 1> defined; // full-row flag
        Eigen::ArrayXd incidence;                      // weekly incidence, NaN where undefined
    };
    std::map<Fips, CountyRows> counties;
    std::map<Fips, double> population;

    // Index into weeks, or -1.
    int week_index(const EpiWeek& w) const;
    bool row_defined(Fips f, int week_idx) const;
    std::optional<double> incidence_at(Fips f, const EpiWeek& w) const;
};

// Weekly incidence per 10,000 residents.
double incidence_rate_per_10k(const CountyPanel& panel, Fips county, const EpiWeek& week);

// Friendship-probability connectedness between two county user populations.
double social_connectedness(double friendships, double users_i, double users_j);

// Connectedness-weighted mean of other counties' incidence rates. Counties
// with a missing rate contribute nothing and leave the denominator. Throws
// DomainError when no connected county has a rate (isolated county).
double spc(const ConnectednessGraph& graph, const std::map<Fips, double>& rates, Fips county);

// Vectorized form over all graph nodes; rates aligned to graph.nodes() with
// NaN marking missing. Output NaN for nodes whose denominator is empty.
Eigen::VectorXd spc_all(const ConnectednessGraph& graph, const Eigen::VectorXd& rates);

FeatureTable build_feature_table(const CountyPanel& panel, const ConnectednessGraph& graph,
                                 int monthly_window_weeks = 4);

void write_feature_csv(const FeatureTable& table, const std::string& path);

struct TrainingInstance {
    Fips county = 0;
    EpiWeek anchor_week;
    Eigen::MatrixXd window;  // (lag+1) x 10, oldest week first
    double target = 0.0;     // incidence at anchor_week + horizon
    int horizon = 1;
};

struct WindowSet {
    std::vector<TrainingInstance> training;
    std::map<Fips, Eigen::MatrixXd> inference;  // window ending at as_of
    EpiWeek as_of;
    int lag = 0;
    int horizon = 1;
};

// Builds supervised windows. Training uses only weeks <= as_of for both
// features and targets; instances touching a zero-incidence week (window or
// target) are excluded. Inference windows are exempt from the zero filter.
WindowSet make_windows(const FeatureTable& table, int lag, int horizon, const EpiWeek& as_of);

struct NormalizationStats {
    Eigen::VectorXd mean;    // per feature column
    Eigen::VectorXd stddev;  // population sd, > 0
    double target_mean = 0.0;
    double target_sd = 1.0;
    // Static-attribute scaling for the hybrid variant; empty when unused.
    Eigen::VectorXd static_mean, static_sd;
};

// Z-score statistics over all window rows (and targets) of the training set.
// A constant feature column is a hard error naming the column.
NormalizationStats fit_normalizer(const std::vector<TrainingInstance>& instances);

Eigen::MatrixXd apply_normalizer(const NormalizationStats& stats, const Eigen::MatrixXd& window);

} // namespace countycast
