#pragma once

// Deterministic synthetic fixtures for tests: a spatially coupled epidemic
// written in the ingestion file formats, plus in-memory window sets for
// training-behavior checks.

#include <string>
#include <vector>

#include "countycast/date.hpp"
#include "countycast/features.hpp"

namespace synthetic {

struct EpidemicSpec {
    int n_counties = 100;
    int n_weeks = 60;
    std::uint64_t seed = 42;
    countycast::Date start = countycast::Date(2020, 4, 5);  // a Sunday
    int neighbors_per_county = 6;
    // Damped oscillatory log-rate dynamics with graph coupling and a shared
    // forcing wave. Defaults give pronounced epidemic waves (about one log
    // unit peak to trough) over modest observation noise, so trend-following
    // skill is measurable against persistence.
    double phi1 = 1.2;
    double phi2 = -0.45;
    double coupling = 0.08;
    double noise_sd = 0.025;
    double forcing = 0.18;
    double forcing_period_weeks = 26.0;
};

// Writes cases.csv, mobility.tsv, sci.tsv, static.csv, weather.csv into dir
// (created if needed). Returns the county FIPS codes used.
std::vector<countycast::Fips> write_epidemic_fixture(const std::string& dir,
                                                     const EpidemicSpec& spec);

// Gap-free single-column-driven feature table for window-law tests: every
// row defined, incidence strictly positive unless zero_weeks marks them.
countycast::FeatureTable synthetic_table(int n_counties, int n_weeks, std::uint64_t seed,
                                         const std::vector<int>& zero_weeks = {});

// Supervised instances where target = slope * last-week incidence + noise;
// the conditional quantile offsets are exactly z_q * noise_sd.
struct QuantileTask {
    std::vector<countycast::TrainingInstance> train;
    std::vector<countycast::TrainingInstance> eval;
    double noise_sd = 0.0;
    double slope = 0.0;
};
QuantileTask make_quantile_task(int n_train, int n_eval, int lag, double noise_sd,
                                std::uint64_t seed);

// Noiseless linear-teacher instances: target is an exact linear function of
// the window mean of column 0.
std::vector<countycast::TrainingInstance> linear_teacher(int n, int lag, std::uint64_t seed);

} // namespace synthetic
