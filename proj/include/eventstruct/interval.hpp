#pragma once

#include <vector>

namespace eventstruct {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Two-sided percentile interval (linear interpolation between order
// statistics) of a bootstrap distribution; `values` is sorted in place.
Interval percentile_interval(std::vector<double>& values, double level);

}  // namespace eventstruct
