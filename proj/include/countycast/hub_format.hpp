#pragma once

#include <string>

#include "countycast/forecaster.hpp"

namespace countycast {

// Submission-layout CSV: header forecast_date,target,target_end_date,
// location,type,quantile,value. Point rows leave the quantile column empty;
// targets read "N wk ahead inc case"; locations are 5-digit zero-padded FIPS;
// dates are YYYY-MM-DD. Row order is deterministic.
void write_hub_csv(const ForecastSet& set, const std::string& path, bool include_quantiles);

// Inverse of write_hub_csv; tolerates point-only files.
ForecastSet read_hub_csv(const std::string& path);

} // namespace countycast
