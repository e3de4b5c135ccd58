#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "countycast/panel.hpp"

namespace countycast {

// Intermediate per-source parses. Loaders are independent (and may run
// concurrently on distinct sources); assemble_panel merges them.

struct CasesPartial {
    Date first, last;
    struct Series {
        Eigen::ArrayXd cumulative;  // running-max corrected
        Eigen::ArrayXd new_cases;   // zero-clamped raw differences
    };
    std::map<Fips, Series> counties;
    bool empty() const { return counties.empty(); }
};

struct MovementPartial {
    // (date, change_in_movement, stay_put) rows per county
    std::map<Fips, std::vector<std::tuple<Date, double, double>>> rows;
};

struct StaticPartial {
    struct Row {
        double population = 0.0;
        Eigen::Array<double, kStaticAttrCount, 1> attrs;
        Row() { attrs.setConstant(std::numeric_limits<double>::quiet_NaN()); }
    };
    std::map<Fips, Row> counties;
};

struct WeatherPartial {
    // (date, tmin_c, tmax_c) rows per county
    std::map<Fips, std::vector<std::tuple<Date, double, double>>> rows;
};

// Wide cumulative-cases layout: header FIPS,County_Name,<M/D/YY dates...>,
// one row per county. Negative daily differences are clamped to zero and the
// cumulative column corrected to its running max; both are logged as
// anomalies. Duplicate FIPS rows are a hard error.
CasesPartial load_cases(const std::string& path, IngestReport& report);

// Tab-separated mobility rows: ds, polygon_id,
// all_day_bing_tiles_visited_relative_change, all_day_ratio_single_tile_users.
// stay_put outside [0,1] or an unparseable date rejects the row.
MovementPartial load_movement(const std::string& path, IngestReport& report);

// Tab-separated edge list: user_loc, fr_loc, scaled_sci in [1, 1e9].
// One-directional pairs are mirrored; conflicting duplicates are a hard error.
ConnectednessGraph load_sci(const std::string& path, IngestReport& report);

// Comma-separated attributes keyed by FIPS: fips,population[,<attr columns>].
// population <= 0 is a hard error.
StaticPartial load_static(const std::string& path, IngestReport& report);

// Comma-separated weather keyed by (FIPS,date): fips,date,tmin_c,tmax_c.
// tmin_c > tmax_c rejects the row.
WeatherPartial load_weather(const std::string& path, IngestReport& report);

// Merges the partial sources over the cases date range. Counties without
// population or full case coverage are dropped and reported, as are counties
// absent from the connectedness graph. Counties missing from the mobility
// source are kept and flagged for imputation at feature time.
CountyPanel assemble_panel(const CasesPartial& cases, const MovementPartial& movement,
                           const StaticPartial& statics, const WeatherPartial& weather,
                           const ConnectednessGraph& graph, IngestReport& report);

// Canonical snapshot: versioned, checksummed single-file container holding the
// panel and graph. restore(snapshot(x)) is bit-exact on all numeric columns.
void write_snapshot(const CountyPanel& panel, const ConnectednessGraph& graph,
                    const std::string& path);
std::pair<CountyPanel, ConnectednessGraph> read_snapshot(const std::string& path);

} // namespace countycast
