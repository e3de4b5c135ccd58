#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "countycast/daily_series.hpp"
#include "countycast/date.hpp"

namespace countycast {

// FIPS county identifier, rendered as a 5-digit zero-padded code.
using Fips = int;

std::string fips_code(Fips f);
// Accepts "08013", "8013", or 8013-style integers.
std::optional<Fips> parse_fips(std::string_view text);

// Optional atemporal county attributes, in fixed column order.
inline constexpr std::array<std::string_view, 8> kStaticAttrNames = {
    "pop_density",   "prop_black", "prop_hispanic",   "prop_indigenous",
    "prop_over_65",  "prop_rural", "vote_share_2016", "median_income",
};
inline constexpr int kStaticAttrCount = 8;

struct CountyRecord {
    double population = 0.0;
    Eigen::Array<double, kStaticAttrCount, 1> attrs;  // NaN where unknown
    bool mobility_imputed = false;  // county absent from the mobility source

    // All daily series share the panel date range.
    DailySeries cumulative_cases;  // corrected to be non-decreasing
    DailySeries new_cases;         // zero-clamped daily differences
    DailySeries change_in_movement;
    DailySeries stay_put;
    DailySeries temp_min;
    DailySeries temp_max;

    CountyRecord() { attrs.setConstant(std::numeric_limits<double>::quiet_NaN()); }

    bool has_all_attrs() const { return attrs.isFinite().all(); }
};

// Daily, FIPS-keyed panel of observations plus static county attributes.
// Immutable once assembled; keyed map keeps iteration deterministic.
struct CountyPanel {
    Date first, last;  // inclusive
    std::map<Fips, CountyRecord> counties;

    Eigen::Index num_days() const { return last - first + 1; }
    bool has(Fips f) const { return counties.count(f) != 0; }
};

// Sparse symmetric social-connectedness graph over counties. Self-edges are
// stored but excluded from row sums used in exposure aggregation.
class ConnectednessGraph {
public:
    ConnectednessGraph() = default;
    // Edges must already be conflict-free; each undirected pair appears once.
    ConnectednessGraph(std::vector<Fips> nodes,
                       const std::vector<std::tuple<Fips, Fips, double>>& edges);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Fips>& nodes() const { return nodes_; }
    bool has(Fips f) const { return index_.count(f) != 0; }
    int index_of(Fips f) const;

    // 0 when the pair is not connected.
    double sci(Fips i, Fips j) const;

    const Eigen::SparseMatrix<double>& matrix() const { return sci_; }

    // Sum of sci(i, h) over stored neighbors h != i.
    double row_sum_excluding_self(int index) const;

private:
    std::vector<Fips> nodes_;  // sorted
    std::map<Fips, int> index_;
    Eigen::SparseMatrix<double> sci_;
};

struct SourceCounts {
    long read = 0;
    long accepted = 0;
    long rejected = 0;
};

struct IngestReport {
    std::map<std::string, SourceCounts> sources;
    std::vector<std::string> anomalies;          // e.g. negative cumulative diffs
    std::vector<std::string> dropped_counties;   // "<fips>: reason"

    SourceCounts& source(const std::string& name) { return sources[name]; }
    std::string summary() const;
};

} // namespace countycast
