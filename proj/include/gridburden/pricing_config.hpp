#pragma once

#include <string_view>

#include "gridburden/pricing.hpp"

namespace gridburden {

// Parses the retail pricing configuration block:
//
//   {
//     "model": 0,
//     "omega": 5.0,            // scalar $/MWh, or {"<bus_id>": value, ...}
//     "phi": 0.0,              // diagonal profit rate, scalar or per-bus map
//     "regions": [[1, 2], [3]],
//     "averaging": "per-node", // or "per-region"
//     "series": "series.csv"   // Models 1/2 input, relative to the config file
//   }
//
// omega and phi entries must be >= 0 (negative LMPs are market outcomes and
// pass through with a warning; negative operating costs are rejected here).
RetailConfig parse_retail_config(std::string_view json_text);

}  // namespace gridburden
