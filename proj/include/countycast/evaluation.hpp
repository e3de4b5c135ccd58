#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "countycast/forecaster.hpp"
#include "countycast/panel.hpp"

namespace countycast {

enum class TruthMode { kRaw, kSmoothed };

std::string truth_mode_name(TruthMode mode);

// Weekly ground truth per county. Raw mode sums the reported daily new cases
// inside each epi-week; smoothed mode sums the 7-day rolling average instead.
struct GroundTruth {
    TruthMode mode = TruthMode::kRaw;
    std::vector<EpiWeek> weeks;
    std::map<Fips, Eigen::ArrayXd> values;  // aligned to weeks, NaN undefined

    std::optional<double> value(Fips f, const EpiWeek& w) const;
};

GroundTruth build_truth(const CountyPanel& panel, TruthMode mode);

// Mean absolute error over the counties forecast for (forecast_date, horizon).
// Missing truth for any forecast county is a hard error listing the counties.
double mae(const ForecastSet& forecasts, const GroundTruth& truth, Date forecast_date,
           int horizon);

struct MapeResult {
    double value = 0.0;
    int included = 0;
    int excluded_zero_truth = 0;
};

// Mean absolute percentage error over `filter` counties; zero-truth counties
// are excluded and counted. All-excluded is an undefined-metric error.
MapeResult mape(const ForecastSet& forecasts, const GroundTruth& truth, Date forecast_date,
                int horizon, const std::set<Fips>& filter);

// The k most populous counties; ties broken by ascending FIPS.
std::set<Fips> top_k_by_population(const CountyPanel& panel, int k = 50);

struct NationalPoint {
    Date forecast_date;
    double forecast_total = 0.0;
    double truth_total = 0.0;
};

// County-sums of forecasts and truth per forecast date at one horizon.
std::vector<NationalPoint> aggregate_national(const ForecastSet& forecasts,
                                              const GroundTruth& truth, int horizon);

struct EvalCell {
    Date forecast_date;
    int horizon = 1;
    double mae = 0.0;
    std::optional<double> mape;
    int counties = 0;
    int mape_excluded = 0;
};

struct EvalReport {
    std::string model;
    std::string truth_label;
    std::vector<EvalCell> cells;
    // Period averages are means of the weekly metric values per horizon.
    std::map<int, double> avg_mae;
    std::map<int, double> avg_mape;
};

// Scores one model over every (forecast_date, horizon) present in the set.
EvalReport evaluate_model(const std::string& label, const ForecastSet& forecasts,
                          const GroundTruth& truth, const std::set<Fips>& mape_filter);

// Published comparison scores; rendered next to computed results, never used
// in computation.
struct ReferenceScore {
    std::string model;
    int horizon = 0;         // 0 for horizon-free rows (lag table)
    std::string metric;      // mae | mape | avg_mae_by_lag
    double value = 0.0;
    std::string qualifier;   // e.g. truth mode or lag
    std::string citation;
};

std::vector<ReferenceScore> load_reference_scores(const std::string& path);

// Long-format CSV: model,forecast_date,horizon,metric,value,source.
void write_eval_report_csv(const std::string& path, const std::vector<EvalReport>& reports,
                           const std::vector<ReferenceScore>& references);

} // namespace countycast
