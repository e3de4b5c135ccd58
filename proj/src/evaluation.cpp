#include "countycast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "countycast/csv.hpp"
#include "countycast/daily_series.hpp"
#include "countycast/errors.hpp"

namespace countycast {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

std::string truth_mode_name(TruthMode mode) {
    return mode == TruthMode::kRaw ? "raw" : "smoothed";
}

std::optional<double> GroundTruth::value(Fips f, const EpiWeek& w) const {
    auto it = values.find(f);
    if (it == values.end() || weeks.empty()) return std::nullopt;
    const auto off = (w.start - weeks.front().start) / 7;
    if (off < 0 || off >= static_cast<std::int64_t>(weeks.size())) return std::nullopt;
    const double v = it->second[static_cast<Eigen::Index>(off)];
    if (std::isnan(v)) return std::nullopt;
    return v;
}

GroundTruth build_truth(const CountyPanel& panel, TruthMode mode) {
    GroundTruth truth;
    truth.mode = mode;
    truth.weeks = weeks_covering(panel.first, panel.last);
    const int n = static_cast<int>(truth.weeks.size());
    for (const auto& [fips, rec] : panel.counties) {
        const DailySeries daily =
            mode == TruthMode::kRaw ? rec.new_cases : rolling_average(rec.new_cases, 7);
        Eigen::ArrayXd weekly = Eigen::ArrayXd::Constant(n, kNaN);
        for (int t = 0; t < n; ++t) {
            try {
                weekly[t] = 7.0 * weekly_mean(daily, truth.weeks[static_cast<std::size_t>(t)]);
            } catch (const MissingDataError&) {
                // week not fully covered; leave undefined
            }
        }
        truth.values[fips] = std::move(weekly);
    }
    return truth;
}

namespace {

EpiWeek target_week(Date forecast_date, int horizon) {
    return epiweek_of(forecast_date) + horizon;
}

} // namespace

double mae(const ForecastSet& forecasts, const GroundTruth& truth, Date forecast_date,
           int horizon) {
    const EpiWeek week = target_week(forecast_date, horizon);
    double total = 0.0;
    int n = 0;
    std::vector<Fips> missing;
    for (const auto& [key, entry] : forecasts.entries) {
        if (key.forecast_date != forecast_date || key.horizon != horizon) continue;
        const auto y = truth.value(key.location, week);
        if (!y) {
            missing.push_back(key.location);
            continue;
        }
        total += std::abs(entry.point - *y);
        ++n;
    }
    if (!missing.empty()) {
        std::string names;
        for (const Fips f : missing) names += " " + fips_code(f);
        throw MissingDataError("no truth in week " + week.label() + " for counties:" + names);
    }
    if (n == 0) {
        throw MissingDataError("no forecasts for " + forecast_date.to_iso() + " horizon " +
                               std::to_string(horizon));
    }
    return total / n;
}

MapeResult mape(const ForecastSet& forecasts, const GroundTruth& truth, Date forecast_date,
                int horizon, const std::set<Fips>& filter) {
    const EpiWeek week = target_week(forecast_date, horizon);
    MapeResult result;
    double total = 0.0;
    for (const auto& [key, entry] : forecasts.entries) {
        if (key.forecast_date != forecast_date || key.horizon != horizon) continue;
        if (filter.count(key.location) == 0) continue;
        const auto y = truth.value(key.location, week);
        if (!y) {
            throw MissingDataError("no truth in week " + week.label() + " for county " +
                                   fips_code(key.location));
        }
        if (*y == 0.0) {
            ++result.excluded_zero_truth;
            continue;
        }
        total += std::abs(entry.point - *y) / *y;
        ++result.included;
    }
    if (result.included == 0) {
        throw DomainError("MAPE undefined: every county excluded for " + forecast_date.to_iso() +
                          " horizon " + std::to_string(horizon));
    }
    result.value = 100.0 * total / result.included;
    return result;
}

std::set<Fips> top_k_by_population(const CountyPanel& panel, int k) {
    if (k < 1) throw InputError("top_k_by_population needs k >= 1");
    std::vector<std::pair<double, Fips>> ranked;
    ranked.reserve(panel.counties.size());
    for (const auto& [fips, rec] : panel.counties) ranked.emplace_back(rec.population, fips);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::set<Fips> out;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i) {
        out.insert(ranked[i].second);
    }
    return out;
}

std::vector<NationalPoint> aggregate_national(const ForecastSet& forecasts,
                                              const GroundTruth& truth, int horizon) {
    std::map<Date, NationalPoint> by_date;
    for (const auto& [key, entry] : forecasts.entries) {
        if (key.horizon != horizon) continue;
        auto& point = by_date[key.forecast_date];
        point.forecast_date = key.forecast_date;
        point.forecast_total += entry.point;
        const auto y = truth.value(key.location, target_week(key.forecast_date, horizon));
        if (y) point.truth_total += *y;
    }
    std::vector<NationalPoint> out;
    out.reserve(by_date.size());
    for (auto& [date, point] : by_date) out.push_back(point);
    return out;
}

EvalReport evaluate_model(const std::string& label, const ForecastSet& forecasts,
                          const GroundTruth& truth, const std::set<Fips>& mape_filter) {
    EvalReport report;
    report.model = label;
    report.truth_label = truth_mode_name(truth.mode);

    std::set<std::pair<Date, int>> keys;
    for (const auto& [key, entry] : forecasts.entries) {
        keys.insert({key.forecast_date, key.horizon});
    }
    std::map<int, std::vector<double>> weekly_mae, weekly_mape;
    for (const auto& [date, horizon] : keys) {
        EvalCell cell;
        cell.forecast_date = date;
        cell.horizon = horizon;
        cell.mae = mae(forecasts, truth, date, horizon);
        weekly_mae[horizon].push_back(cell.mae);
        int n = 0;
        for (const auto& [key, entry] : forecasts.entries) {
            if (key.forecast_date == date && key.horizon == horizon) ++n;
        }
        cell.counties = n;
        try {
            const MapeResult m = mape(forecasts, truth, date, horizon, mape_filter);
            cell.mape = m.value;
            cell.mape_excluded = m.excluded_zero_truth;
            weekly_mape[horizon].push_back(m.value);
        } catch (const DomainError&) {
            // every filtered county had zero truth; MAPE stays undefined
        }
        report.cells.push_back(cell);
    }
    for (const auto& [horizon, values] : weekly_mae) {
        double sum = 0.0;
        for (const double v : values) sum += v;
        report.avg_mae[horizon] = sum / static_cast<double>(values.size());
    }
    for (const auto& [horizon, values] : weekly_mape) {
        double sum = 0.0;
        for (const double v : values) sum += v;
        report.avg_mape[horizon] = sum / static_cast<double>(values.size());
    }
    return report;
}

std::vector<ReferenceScore> load_reference_scores(const std::string& path) {
    auto rows = csv::read_table(path, ',');
    if (rows.empty()) return {};
    const auto& header = rows.front();
    const int c_model = csv::column_index(header, "model");
    const int c_horizon = csv::column_index(header, "horizon");
    const int c_metric = csv::column_index(header, "metric");
    const int c_value = csv::column_index(header, "value");
    const int c_qual = csv::column_index(header, "qualifier");
    const int c_cite = csv::column_index(header, "citation");
    if (c_model < 0 || c_horizon < 0 || c_metric < 0 || c_value < 0 || c_cite < 0) {
        throw InputError("reference score file missing required columns: " + path);
    }
    std::vector<ReferenceScore> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ReferenceScore score;
        score.model = row[static_cast<std::size_t>(c_model)];
        const auto horizon = csv::parse_int(row[static_cast<std::size_t>(c_horizon)]);
        const auto value = csv::parse_double(row[static_cast<std::size_t>(c_value)]);
        if (!horizon || !value) throw InputError("malformed reference score row in " + path);
        score.horizon = static_cast<int>(*horizon);
        score.metric = row[static_cast<std::size_t>(c_metric)];
        score.value = *value;
        if (c_qual >= 0 && row.size() > static_cast<std::size_t>(c_qual)) {
            score.qualifier = row[static_cast<std::size_t>(c_qual)];
        }
        score.citation = row[static_cast<std::size_t>(c_cite)];
        out.push_back(std::move(score));
    }
    return out;
}

void write_eval_report_csv(const std::string& path, const std::vector<EvalReport>& reports,
                           const std::vector<ReferenceScore>& references) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write eval report: " + path);
    out << "model,truth,forecast_date,horizon,metric,value,source\n";
    for (const auto& report : reports) {
        for (const auto& cell : report.cells) {
            out << report.model << ',' << report.truth_label << ',' << cell.forecast_date.to_iso()
                << ',' << cell.horizon << ",mae," << csv::format_double(cell.mae) << ",computed\n";
            if (cell.mape) {
                out << report.model << ',' << report.truth_label << ','
                    << cell.forecast_date.to_iso() << ',' << cell.horizon << ",mape,"
                    << csv::format_double(*cell.mape) << ",computed\n";
                out << report.model << ',' << report.truth_label << ','
                    << cell.forecast_date.to_iso() << ',' << cell.horizon
                    << ",mape_excluded_zero_truth," << cell.mape_excluded << ",computed\n";
            }
            out << report.model << ',' << report.truth_label << ',' << cell.forecast_date.to_iso()
                << ',' << cell.horizon << ",county_count," << cell.counties << ",computed\n";
        }
        for (const auto& [horizon, value] : report.avg_mae) {
            out << report.model << ',' << report.truth_label << ",period_average," << horizon
                << ",mae," << csv::format_double(value) << ",computed\n";
        }
        for (const auto& [horizon, value] : report.avg_mape) {
            out << report.model << ',' << report.truth_label << ",period_average," << horizon
                << ",mape," << csv::format_double(value) << ",computed\n";
        }
    }
    for (const auto& ref : references) {
        out << ref.model << ',' << (ref.qualifier.empty() ? "raw" : ref.qualifier)
            << ",period_average," << ref.horizon << ',' << ref.metric << ','
            << csv::format_double(ref.value) << ",reference:" << ref.citation << '\n';
    }
}

} // namespace countycast
