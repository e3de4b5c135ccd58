#include "countycast/features.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "countycast/csv.hpp"
#include "countycast/daily_series.hpp"
#include "countycast/errors.hpp"
#include "countycast/log.hpp"

namespace countycast {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

const std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "new_weekly_incidence", "monthly_mean_cumulative_incidence",
    "stay_put_mean",        "stay_put_slope",
    "change_in_movement_mean", "change_in_movement_slope",
    "spc_weekly_change",    "spc_monthly_mean",
    "temp_min_weekly",      "temp_max_weekly",
};

int FeatureTable::week_index(const EpiWeek& w) const {
    if (weeks.empty()) return -1;
    const auto off = (w.start - weeks.front().start) / 7;
    if (off < 0 || off >= static_cast<std::int64_t>(weeks.size())) return -1;
    return static_cast<int>(off);
}

bool FeatureTable::row_defined(Fips f, int week_idx) const {
    auto it = counties.find(f);
    if (it == counties.end() || week_idx < 0 ||
        week_idx >= static_cast<int>(it->second.defined.size())) {
        return false;
    }
    return it->second.defined[week_idx];
}

std::optional<double> FeatureTable::incidence_at(Fips f, const EpiWeek& w) const {
    auto it = counties.find(f);
    const int idx = week_index(w);
    if (it == counties.end() || idx < 0) return std::nullopt;
    const double v = it->second.incidence[idx];
    if (std::isnan(v)) return std::nullopt;
    return v;
}

double incidence_rate_per_10k(const CountyPanel& panel, Fips county, const EpiWeek& week) {
    auto it = panel.counties.find(county);
    if (it == panel.counties.end()) {
        throw MissingDataError("county " + fips_code(county) + " not in panel");
    }
    const auto smoothed = rolling_average(it->second.new_cases, 7);
    const double weekly = 7.0 * weekly_mean(smoothed, week);
    return weekly * 10000.0 / it->second.population;
}

double social_connectedness(double friendships, double users_i, double users_j) {
    if (users_i < 1.0 || users_j < 1.0) {
        throw DomainError("social_connectedness requires at least one user on each side");
    }
    if (friendships < 0.0 || friendships > users_i * users_j) {
        throw DomainError("friendship count outside [0, users_i * users_j]");
    }
    return friendships / (users_i * users_j);
}

Eigen::VectorXd spc_all(const ConnectednessGraph& graph, const Eigen::VectorXd& rates) {
    const auto n = static_cast<Eigen::Index>(graph.size());
    if (rates.size() != n) throw ShapeError("rates vector does not match graph size");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, kNaN);
    const auto& m = graph.matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
        double num = 0.0;
        double den = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, i); it; ++it) {
            const Eigen::Index j = it.row();
            if (j == i) continue;  // self-connectedness never counts
            const double r = rates[j];
            if (std::isnan(r)) continue;  // missing rate: drop from both sums
            num += r * it.value();
            den += it.value();
        }
        if (den > 0.0) out[i] = num / den;
    }
    return out;
}

double spc(const ConnectednessGraph& graph, const std::map<Fips, double>& rates, Fips county) {
    const int i = graph.index_of(county);
    Eigen::VectorXd aligned = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(graph.size()), kNaN);
    for (const auto& [f, r] : rates) {
        if (graph.has(f)) aligned[graph.index_of(f)] = r;
    }
    double num = 0.0, den = 0.0;
    const auto& m = graph.matrix();
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, i); it; ++it) {
        if (it.row() == i) continue;
        const double r = aligned[it.row()];
        if (std::isnan(r)) continue;
        num += r * it.value();
        den += it.value();
    }
    if (den <= 0.0) {
        throw DomainError("county " + fips_code(county) +
                          " has no connected county with a defined rate");
    }
    return num / den;
}

namespace {

// National per-day mean over defined entries; used to fill mobility gaps.
DailySeries national_daily_mean(const CountyPanel& panel,
                                DailySeries CountyRecord::*column) {
    const Eigen::Index n = panel.num_days();
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(n);
    Eigen::ArrayXd cnt = Eigen::ArrayXd::Zero(n);
    for (const auto& [fips, rec] : panel.counties) {
        const DailySeries& s = rec.*column;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!s.missing[i]) {
                sum[i] += s.values[i];
                cnt[i] += 1.0;
            }
        }
    }
    DailySeries out = DailySeries::all_missing(panel.first, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (cnt[i] > 0.0) out.set(i, sum[i] / cnt[i]);
    }
    return out;
}

DailySeries impute_with(const DailySeries& s, const DailySeries& fill) {
    DailySeries out = s;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (out.missing[i] && !fill.missing[i]) out.set(i, fill.values[i]);
    }
    return out;
}

// weekly_mean/.._slope wrappers that return NaN instead of throwing.
double try_weekly_mean(const DailySeries& s, const EpiWeek& w) {
    try {
        return weekly_mean(s, w);
    } catch (const MissingDataError&) {
        return kNaN;
    }
}

double try_weekly_slope(const DailySeries& s, const EpiWeek& w) {
    try {
        return weekly_slope(s, w);
    } catch (const MissingDataError&) {
        return kNaN;
    }
}

} // namespace

FeatureTable build_feature_table(const CountyPanel& panel, const ConnectednessGraph& graph,
                                 int monthly_window_weeks) {
    if (monthly_window_weeks < 1) throw InputError("monthly window must be >= 1 week");
    FeatureTable table;
    table.weeks = weeks_covering(panel.first, panel.last);
    const int n_weeks = static_cast<int>(table.weeks.size());
    if (n_weeks == 0) return table;

    const DailySeries fill_stay = national_daily_mean(panel, &CountyRecord::stay_put);
    const DailySeries fill_move = national_daily_mean(panel, &CountyRecord::change_in_movement);

    // Weekly per-county aggregates, NaN where the underlying days are missing.
    struct WeeklyCols {
        Eigen::ArrayXd incidence, mean_cumulative, stay_mean, stay_slope, move_mean, move_slope,
            tmin, tmax, rate;
    };
    std::map<Fips, WeeklyCols> weekly;

    for (const auto& [fips, rec] : panel.counties) {
        WeeklyCols cols;
        for (auto* col : {&cols.incidence, &cols.mean_cumulative, &cols.stay_mean,
                          &cols.stay_slope, &cols.move_mean, &cols.move_slope, &cols.tmin,
                          &cols.tmax, &cols.rate}) {
            *col = Eigen::ArrayXd::Constant(n_weeks, kNaN);
        }

        const DailySeries smooth_new = rolling_average(rec.new_cases, 7);
        const DailySeries smooth_cum = rolling_average(rec.cumulative_cases, 7);
        const DailySeries stay = rolling_average(impute_with(rec.stay_put, fill_stay), 7);
        const DailySeries move = rolling_average(impute_with(rec.change_in_movement, fill_move), 7);

        for (int t = 0; t < n_weeks; ++t) {
            const EpiWeek& w = table.weeks[static_cast<std::size_t>(t)];
            const double mean_new = try_weekly_mean(smooth_new, w);
            if (!std::isnan(mean_new)) {
                cols.incidence[t] = 7.0 * mean_new;
                cols.rate[t] = cols.incidence[t] * 10000.0 / rec.population;
            }
            cols.mean_cumulative[t] = try_weekly_mean(smooth_cum, w);
            cols.stay_mean[t] = try_weekly_mean(stay, w);
            cols.stay_slope[t] = try_weekly_slope(stay, w);
            cols.move_mean[t] = try_weekly_mean(move, w);
            cols.move_slope[t] = try_weekly_slope(move, w);
            cols.tmin[t] = try_weekly_mean(rec.temp_min, w);
            cols.tmax[t] = try_weekly_mean(rec.temp_max, w);
        }
        weekly[fips] = std::move(cols);
    }

    // SPC needs every county's rate for the week, so it runs as a second pass.
    const auto n_nodes = static_cast<Eigen::Index>(graph.size());
    Eigen::MatrixXd spc_by_week(n_nodes, n_weeks);
    spc_by_week.setConstant(kNaN);
    for (int t = 0; t < n_weeks; ++t) {
        Eigen::VectorXd rates = Eigen::VectorXd::Constant(n_nodes, kNaN);
        for (const auto& [fips, cols] : weekly) {
            if (graph.has(fips)) rates[graph.index_of(fips)] = cols.rate[t];
        }
        spc_by_week.col(t) = spc_all(graph, rates);
    }

    auto trailing_mean = [&](const Eigen::ArrayXd& series, int t) {
        if (t + 1 < monthly_window_weeks) return kNaN;
        double sum = 0.0;
        for (int k = t - monthly_window_weeks + 1; k <= t; ++k) {
            if (std::isnan(series[k])) return kNaN;
            sum += series[k];
        }
        return sum / monthly_window_weeks;
    };

    for (auto& [fips, cols] : weekly) {
        FeatureTable::CountyRows rows;
        rows.values = Eigen::MatrixXd::Constant(n_weeks, kFeatureCount, kNaN);
        rows.defined = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n_weeks, false);
        rows.incidence = cols.incidence;

        Eigen::ArrayXd spc_series = Eigen::ArrayXd::Constant(n_weeks, kNaN);
        if (graph.has(fips)) {
            spc_series = spc_by_week.row(graph.index_of(fips)).array().transpose();
        }

        for (int t = 0; t < n_weeks; ++t) {
            auto row = rows.values.row(t);
            row[kNewWeeklyIncidence] = cols.incidence[t];
            row[kMonthlyMeanCumulative] = trailing_mean(cols.mean_cumulative, t);
            row[kStayPutMean] = cols.stay_mean[t];
            row[kStayPutSlope] = cols.stay_slope[t];
            row[kMovementMean] = cols.move_mean[t];
            row[kMovementSlope] = cols.move_slope[t];
            row[kSpcWeeklyChange] = t >= 1 ? spc_series[t] - spc_series[t - 1] : kNaN;
            row[kSpcMonthlyMean] = trailing_mean(spc_series, t);
            row[kTempMinWeekly] = cols.tmin[t];
            row[kTempMaxWeekly] = cols.tmax[t];
            rows.defined[t] = row.allFinite();
            if (!rows.defined[t]) row.setConstant(kNaN);
        }
        table.counties[fips] = std::move(rows);
        table.population[fips] = panel.counties.at(fips).population;
    }
    return table;
}

void write_feature_csv(const FeatureTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write feature table: " + path);
    out << "fips,epiweek_year,epiweek_week";
    for (const auto& name : kFeatureNames) out << ',' << name;
    out << '\n';
    for (const auto& [fips, rows] : table.counties) {
        for (std::size_t t = 0; t < table.weeks.size(); ++t) {
            if (!rows.defined[static_cast<Eigen::Index>(t)]) continue;
            const EpiWeek& w = table.weeks[t];
            out << fips_code(fips) << ',' << w.year << ',' << w.week;
            for (int c = 0; c < kFeatureCount; ++c) {
                out << ',' << csv::format_double(rows.values(static_cast<Eigen::Index>(t), c));
            }
            out << '\n';
        }
    }
}

WindowSet make_windows(const FeatureTable& table, int lag, int horizon, const EpiWeek& as_of) {
    if (lag < 0) throw InputError("lag must be >= 0");
    if (horizon < 1 || horizon > 4) throw InputError("horizon must be in 1..4");
    const int as_of_idx = table.week_index(as_of);
    if (as_of_idx < 0) throw InputError("as_of week " + as_of.label() + " not covered by table");
    if (as_of_idx < lag + horizon) {
        throw InputError("table history too short for lag " + std::to_string(lag) +
                         " and horizon " + std::to_string(horizon));
    }

    WindowSet out;
    out.as_of = as_of;
    out.lag = lag;
    out.horizon = horizon;

    for (const auto& [fips, rows] : table.counties) {
        // Training anchors: window and target entirely at or before as_of.
        for (int anchor = lag; anchor + horizon <= as_of_idx; ++anchor) {
            bool usable = true;
            for (int k = anchor - lag; k <= anchor; ++k) {
                if (!rows.defined[k] || rows.values(k, kNewWeeklyIncidence) == 0.0) {
                    usable = false;
                    break;
                }
            }
            const double target = rows.incidence[anchor + horizon];
            if (!usable || std::isnan(target) || target == 0.0) continue;
            TrainingInstance inst;
            inst.county = fips;
            inst.anchor_week = table.weeks[static_cast<std::size_t>(anchor)];
            inst.window = rows.values.middleRows(anchor - lag, lag + 1);
            inst.target = target;
            inst.horizon = horizon;
            out.training.push_back(std::move(inst));
        }
        // Inference window ending at as_of; never zero-filtered.
        bool complete = true;
        for (int k = as_of_idx - lag; k <= as_of_idx; ++k) {
            if (!rows.defined[k]) {
                complete = false;
                break;
            }
        }
        if (complete) {
            out.inference[fips] = rows.values.middleRows(as_of_idx - lag, lag + 1);
        }
    }
    return out;
}

NormalizationStats fit_normalizer(const std::vector<TrainingInstance>& instances) {
    if (instances.size() < 2) throw InputError("need at least 2 training instances to fit scaler");
    NormalizationStats stats;
    stats.mean = Eigen::VectorXd::Zero(kFeatureCount);
    stats.stddev = Eigen::VectorXd::Zero(kFeatureCount);

    double n_rows = 0.0;
    for (const auto& inst : instances) {
        stats.mean += inst.window.colwise().sum().transpose();
        n_rows += static_cast<double>(inst.window.rows());
    }
    stats.mean /= n_rows;
    for (const auto& inst : instances) {
        stats.stddev +=
            (inst.window.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    stats.stddev = (stats.stddev / n_rows).array().sqrt();
    for (int c = 0; c < kFeatureCount; ++c) {
        if (!(stats.stddev[c] > 0.0)) {
            throw InputError(std::string("constant feature column: ") + std::string(kFeatureNames[static_cast<std::size_t>(c)]));
        }
    }

    double tsum = 0.0;
    for (const auto& inst : instances) tsum += inst.target;
    stats.target_mean = tsum / static_cast<double>(instances.size());
    double tvar = 0.0;
    for (const auto& inst : instances) {
        const double d = inst.target - stats.target_mean;
        tvar += d * d;
    }
    stats.target_sd = std::sqrt(tvar / static_cast<double>(instances.size()));
    if (!(stats.target_sd > 0.0)) throw InputError("constant feature column: target");
    return stats;
}

Eigen::MatrixXd apply_normalizer(const NormalizationStats& stats, const Eigen::MatrixXd& window) {
    if (window.cols() != stats.mean.size()) {
        throw ShapeError("window has wrong number of feature columns");
    }
    return (window.rowwise() - stats.mean.transpose()).array().rowwise() /
           stats.stddev.transpose().array();
}

} // namespace countycast
