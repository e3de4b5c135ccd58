#include "countycast/hub_format.hpp"

#include <fstream>

#include "countycast/csv.hpp"
#include "countycast/errors.hpp"
#include "countycast/epiweek.hpp"

namespace countycast {

namespace {

std::string target_string(int horizon) {
    return std::to_string(horizon) + " wk ahead inc case";
}

// "N wk ahead inc case" -> N
std::optional<int> parse_target(const std::string& target) {
    const std::string suffix = " wk ahead inc case";
    if (target.size() <= suffix.size()) return std::nullopt;
    if (target.compare(target.size() - suffix.size(), suffix.size(), suffix) != 0) {
        return std::nullopt;
    }
    const auto n = csv::parse_int(target.substr(0, target.size() - suffix.size()));
    if (!n || *n < 1) return std::nullopt;
    return static_cast<int>(*n);
}

} // namespace

void write_hub_csv(const ForecastSet& set, const std::string& path, bool include_quantiles) {
    set.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write forecast file: " + path);
    out << "forecast_date,target,target_end_date,location,type,quantile,value\n";
    for (const auto& [key, entry] : set.entries) {
        const Date target_end = epiweek_of(key.forecast_date).end() + 7 * key.horizon;
        const std::string prefix = key.forecast_date.to_iso() + "," + target_string(key.horizon) +
                                   "," + target_end.to_iso() + "," + fips_code(key.location);
        out << prefix << ",point,," << csv::format_double(entry.point) << '\n';
        if (include_quantiles && entry.quantiles) {
            for (std::size_t q = 0; q < kPublishedQuantiles.size(); ++q) {
                out << prefix << ",quantile," << csv::format_double(kPublishedQuantiles[q]) << ','
                    << csv::format_double((*entry.quantiles)[q]) << '\n';
            }
        }
    }
    if (!out) throw InputError("short write on forecast file: " + path);
}

ForecastSet read_hub_csv(const std::string& path) {
    auto rows = csv::read_table(path, ',');
    if (rows.empty()) throw InputError("empty forecast file: " + path);
    const auto& header = rows.front();
    const int c_date = csv::column_index(header, "forecast_date");
    const int c_target = csv::column_index(header, "target");
    const int c_loc = csv::column_index(header, "location");
    const int c_type = csv::column_index(header, "type");
    const int c_q = csv::column_index(header, "quantile");
    const int c_v = csv::column_index(header, "value");
    if (c_date < 0 || c_target < 0 || c_loc < 0 || c_type < 0 || c_q < 0 || c_v < 0) {
        throw InputError("forecast file missing required columns: " + path);
    }

    ForecastSet set;
    std::map<ForecastKey, std::map<double, double>> quantiles;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw InputError("malformed forecast row " + std::to_string(r + 1) + " in " + path);
        }
        const auto date = Date::parse_iso(row[static_cast<std::size_t>(c_date)]);
        const auto horizon = parse_target(row[static_cast<std::size_t>(c_target)]);
        const auto fips = parse_fips(row[static_cast<std::size_t>(c_loc)]);
        const auto value = csv::parse_double(row[static_cast<std::size_t>(c_v)]);
        if (!date || !horizon || !fips || !value) {
            throw InputError("malformed forecast row " + std::to_string(r + 1) + " in " + path);
        }
        const ForecastKey key{*date, *fips, *horizon};
        const std::string& type = row[static_cast<std::size_t>(c_type)];
        if (type == "point") {
            set.entries[key].point = *value;
        } else if (type == "quantile") {
            const auto q = csv::parse_double(row[static_cast<std::size_t>(c_q)]);
            if (!q) throw InputError("quantile row lacks level in " + path);
            quantiles[key][*q] = *value;
        } else {
            throw InputError("unknown forecast row type '" + type + "' in " + path);
        }
    }
    for (const auto& [key, levels] : quantiles) {
        if (levels.size() != kPublishedQuantiles.size()) {
            throw InputError("incomplete quantile set for " + fips_code(key.location) + " in " +
                             path);
        }
        std::array<double, 7> qs{};
        std::size_t i = 0;
        for (const auto& [level, value] : levels) qs[i++] = value;
        auto it = set.entries.find(key);
        if (it == set.entries.end()) {
            throw InputError("quantile rows without point row for " + fips_code(key.location));
        }
        it->second.quantiles = qs;
    }
    return set;
}

} // namespace countycast
