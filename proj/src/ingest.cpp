#include "countycast/ingest.hpp"

#include <algorithm>
#include <set>

#include "countycast/csv.hpp"
#include "countycast/errors.hpp"
#include "countycast/log.hpp"

namespace countycast {

CasesPartial load_cases(const std::string& path, IngestReport& report) {
    auto rows = csv::read_table(path, ',');
    auto& counts = report.source("cases");
    CasesPartial out;
    if (rows.empty()) return out;

    const auto& header = rows.front();
    if (header.size() < 3) throw InputError("cases file needs FIPS, name and date columns: " + path);
    std::vector<Date> dates;
    dates.reserve(header.size() - 2);
    for (std::size_t c = 2; c < header.size(); ++c) {
        auto d = Date::parse_mdy(header[c]);
        if (!d) throw InputError("cases header has unparseable date '" + header[c] + "'");
        if (!dates.empty() && *d != dates.back() + 1) {
            throw InputError("cases header dates are not contiguous at '" + header[c] + "'");
        }
        dates.push_back(*d);
    }
    out.first = dates.front();
    out.last = dates.back();

    const Eigen::Index n = static_cast<Eigen::Index>(dates.size());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        ++counts.read;
        const auto& row = rows[r];
        const auto fips = row.empty() ? std::nullopt : parse_fips(row[0]);
        if (!fips || row.size() != header.size()) {
            ++counts.rejected;
            report.anomalies.push_back("cases row " + std::to_string(r + 1) + ": malformed");
            continue;
        }
        if (out.counties.count(*fips)) {
            throw InputError("duplicate FIPS " + fips_code(*fips) + " in cases file");
        }
        Eigen::ArrayXd raw(n);
        bool ok = true;
        for (Eigen::Index c = 0; c < n; ++c) {
            auto v = csv::parse_double(row[static_cast<std::size_t>(c) + 2]);
            if (!v || *v < 0.0) {
                ok = false;
                break;
            }
            raw[c] = *v;
        }
        if (!ok) {
            ++counts.rejected;
            report.anomalies.push_back("cases row " + std::to_string(r + 1) + " (" +
                                       fips_code(*fips) + "): malformed value");
            continue;
        }
        ++counts.accepted;

        CasesPartial::Series series;
        series.cumulative = raw;
        series.new_cases = Eigen::ArrayXd::Zero(n);
        long drops = 0;
        for (Eigen::Index c = 1; c < n; ++c) {
            const double diff = raw[c] - raw[c - 1];
            series.new_cases[c] = diff > 0.0 ? diff : 0.0;
            if (diff < 0.0) ++drops;
            if (series.cumulative[c] < series.cumulative[c - 1]) {
                series.cumulative[c] = series.cumulative[c - 1];
            }
        }
        if (drops > 0) {
            report.anomalies.push_back("county " + fips_code(*fips) + ": " + std::to_string(drops) +
                                       " negative cumulative difference(s) corrected");
        }
        out.counties[*fips] = std::move(series);
    }
    return out;
}

MovementPartial load_movement(const std::string& path, IngestReport& report) {
    auto rows = csv::read_table(path, '\t');
    auto& counts = report.source("mobility");
    MovementPartial out;
    if (rows.empty()) return out;

    const auto& header = rows.front();
    const int c_date = csv::column_index(header, "ds");
    const int c_fips = csv::column_index(header, "polygon_id");
    const int c_change = csv::column_index(header, "all_day_bing_tiles_visited_relative_change");
    const int c_stay = csv::column_index(header, "all_day_ratio_single_tile_users");
    if (c_date < 0 || c_fips < 0 || c_change < 0 || c_stay < 0) {
        throw InputError("mobility file missing required columns: " + path);
    }
    const std::size_t width =
        static_cast<std::size_t>(std::max({c_date, c_fips, c_change, c_stay})) + 1;

    for (std::size_t r = 1; r < rows.size(); ++r) {
        ++counts.read;
        const auto& row = rows[r];
        if (row.size() < width) {
            ++counts.rejected;
            continue;
        }
        const auto date = Date::parse_iso(row[static_cast<std::size_t>(c_date)]);
        const auto fips = parse_fips(row[static_cast<std::size_t>(c_fips)]);
        const auto change = csv::parse_double(row[static_cast<std::size_t>(c_change)]);
        const auto stay = csv::parse_double(row[static_cast<std::size_t>(c_stay)]);
        if (!date || !fips || !change || !stay || *stay < 0.0 || *stay > 1.0) {
            ++counts.rejected;
            continue;
        }
        ++counts.accepted;
        out.rows[*fips].emplace_back(*date, *change, *stay);
    }
    return out;
}

ConnectednessGraph load_sci(const std::string& path, IngestReport& report) {
    auto rows = csv::read_table(path, '\t');
    auto& counts = report.source("sci");
    if (rows.empty()) return ConnectednessGraph({}, {});

    const auto& header = rows.front();
    const int c_i = csv::column_index(header, "user_loc");
    const int c_j = csv::column_index(header, "fr_loc");
    const int c_w = csv::column_index(header, "scaled_sci");
    if (c_i < 0 || c_j < 0 || c_w < 0) {
        throw InputError("sci file missing required columns: " + path);
    }

    // Canonical (min,max) key; the first stored weight wins and any
    // disagreeing duplicate is a hard error.
    std::map<std::pair<Fips, Fips>, double> weights;
    std::set<Fips> nodes;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        ++counts.read;
        const auto& row = rows[r];
        if (row.size() <= static_cast<std::size_t>(std::max({c_i, c_j, c_w}))) {
            ++counts.rejected;
            continue;
        }
        const auto a = parse_fips(row[static_cast<std::size_t>(c_i)]);
        const auto b = parse_fips(row[static_cast<std::size_t>(c_j)]);
        const auto w = csv::parse_int(row[static_cast<std::size_t>(c_w)]);
        if (!a || !b || !w || *w < 1 || *w > 1000000000LL) {
            ++counts.rejected;
            continue;
        }
        ++counts.accepted;
        const auto key = std::minmax(*a, *b);
        auto [it, inserted] = weights.emplace(key, static_cast<double>(*w));
        if (!inserted && it->second != static_cast<double>(*w)) {
            throw InputError("conflicting sci weights for pair " + fips_code(key.first) + "," +
                             fips_code(key.second));
        }
        nodes.insert(*a);
        nodes.insert(*b);
    }

    std::vector<std::tuple<Fips, Fips, double>> edges;
    edges.reserve(weights.size());
    for (const auto& [key, w] : weights) edges.emplace_back(key.first, key.second, w);
    return ConnectednessGraph(std::vector<Fips>(nodes.begin(), nodes.end()), edges);
}

StaticPartial load_static(const std::string& path, IngestReport& report) {
    auto rows = csv::read_table(path, ',');
    auto& counts = report.source("static");
    StaticPartial out;
    if (rows.empty()) return out;

    const auto& header = rows.front();
    const int c_fips = csv::column_index(header, "fips");
    const int c_pop = csv::column_index(header, "population");
    if (c_fips < 0 || c_pop < 0) {
        throw InputError("static attributes file missing fips/population columns: " + path);
    }
    std::array<int, kStaticAttrCount> attr_cols{};
    for (int k = 0; k < kStaticAttrCount; ++k) {
        attr_cols[static_cast<std::size_t>(k)] =
            csv::column_index(header, kStaticAttrNames[static_cast<std::size_t>(k)]);
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        ++counts.read;
        const auto& row = rows[r];
        std::optional<Fips> fips;
        std::optional<double> pop;
        if (row.size() > static_cast<std::size_t>(std::max(c_fips, c_pop))) {
            fips = parse_fips(row[static_cast<std::size_t>(c_fips)]);
            pop = csv::parse_double(row[static_cast<std::size_t>(c_pop)]);
        }
        if (!fips || !pop) {
            ++counts.rejected;
            continue;
        }
        if (*pop <= 0.0) {
            throw InputError("population must be positive for county " + fips_code(*fips));
        }
        ++counts.accepted;
        StaticPartial::Row entry;
        entry.population = *pop;
        for (int k = 0; k < kStaticAttrCount; ++k) {
            const int col = attr_cols[static_cast<std::size_t>(k)];
            if (col >= 0 && row.size() > static_cast<std::size_t>(col)) {
                if (auto v = csv::parse_double(row[static_cast<std::size_t>(col)])) {
                    entry.attrs[k] = *v;
                }
            }
        }
        out.counties[*fips] = entry;
    }
    return out;
}

WeatherPartial load_weather(const std::string& path, IngestReport& report) {
    auto rows = csv::read_table(path, ',');
    auto& counts = report.source("weather");
    WeatherPartial out;
    if (rows.empty()) return out;

    const auto& header = rows.front();
    const int c_fips = csv::column_index(header, "fips");
    const int c_date = csv::column_index(header, "date");
    const int c_min = csv::column_index(header, "tmin_c");
    const int c_max = csv::column_index(header, "tmax_c");
    if (c_fips < 0 || c_date < 0 || c_min < 0 || c_max < 0) {
        throw InputError("weather file missing required columns: " + path);
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        ++counts.read;
        const auto& row = rows[r];
        if (row.size() <= static_cast<std::size_t>(std::max({c_fips, c_date, c_min, c_max}))) {
            ++counts.rejected;
            continue;
        }
        const auto fips = parse_fips(row[static_cast<std::size_t>(c_fips)]);
        const auto date = Date::parse_iso(row[static_cast<std::size_t>(c_date)]);
        const auto tmin = csv::parse_double(row[static_cast<std::size_t>(c_min)]);
        const auto tmax = csv::parse_double(row[static_cast<std::size_t>(c_max)]);
        if (!fips || !date || !tmin || !tmax || *tmin > *tmax) {
            ++counts.rejected;
            continue;
        }
        ++counts.accepted;
        out.rows[*fips].emplace_back(*date, *tmin, *tmax);
    }
    return out;
}

CountyPanel assemble_panel(const CasesPartial& cases, const MovementPartial& movement,
                           const StaticPartial& statics, const WeatherPartial& weather,
                           const ConnectednessGraph& graph, IngestReport& report) {
    CountyPanel panel;
    if (cases.empty()) return panel;
    panel.first = cases.first;
    panel.last = cases.last;
    const Eigen::Index n = panel.num_days();

    for (const auto& [fips, series] : cases.counties) {
        auto st = statics.counties.find(fips);
        if (st == statics.counties.end()) {
            report.dropped_counties.push_back(fips_code(fips) + ": no population attribute");
            continue;
        }
        if (!graph.has(fips)) {
            report.dropped_counties.push_back(fips_code(fips) + ": not in connectedness graph");
            continue;
        }
        // The wide cases layout guarantees full coverage for accepted rows.
        CountyRecord rec;
        rec.population = st->second.population;
        rec.attrs = st->second.attrs;
        rec.cumulative_cases = DailySeries(panel.first, series.cumulative);
        rec.new_cases = DailySeries(panel.first, series.new_cases);
        rec.change_in_movement = DailySeries::all_missing(panel.first, n);
        rec.stay_put = DailySeries::all_missing(panel.first, n);
        rec.temp_min = DailySeries::all_missing(panel.first, n);
        rec.temp_max = DailySeries::all_missing(panel.first, n);

        auto mv = movement.rows.find(fips);
        if (mv == movement.rows.end()) {
            rec.mobility_imputed = true;
        } else {
            for (const auto& [date, change, stay] : mv->second) {
                const Eigen::Index i = rec.stay_put.index_of(date);
                if (i < 0) continue;  // outside panel range
                rec.change_in_movement.set(i, change);
                rec.stay_put.set(i, stay);
            }
        }
        auto wx = weather.rows.find(fips);
        if (wx != weather.rows.end()) {
            for (const auto& [date, tmin, tmax] : wx->second) {
                const Eigen::Index i = rec.temp_min.index_of(date);
                if (i < 0) continue;
                rec.temp_min.set(i, tmin);
                rec.temp_max.set(i, tmax);
            }
        }
        panel.counties[fips] = std::move(rec);
    }

    if (!report.dropped_counties.empty()) {
        log::warn("dropped ", report.dropped_counties.size(), " county(ies) during assembly");
    }
    return panel;
}

} // namespace countycast
