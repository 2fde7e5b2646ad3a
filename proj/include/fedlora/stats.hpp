#pragma once

#include <span>
#include <vector>

namespace fedlora::stats {

/// Quantile by linear interpolation of order statistics: position (n-1)·q in
/// the sorted sample. `q` in [0, 1]. Throws on empty input.
double quantile(std::span<const double> values, double q);

/// Same rule over data that is already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

inline double percentile(std::span<const double> values, double p) { return quantile(values, p / 100.0); }

double mean(std::span<const double> values);

/// Sample standard deviation (n-1 denominator); 0 for a single value.
double sample_sd(std::span<const double> values);

double median(std::span<const double> values);

}  // namespace fedlora::stats
