#pragma once

#include <span>
#include <vector>

namespace perpsieve::stats {

double mean(std::span<const double> xs);

/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

/// Population skewness; 0 when degenerate.
double skewness(std::span<const double> xs);

/// Population (non-excess) kurtosis, 3 for a normal; 3 when degenerate.
double kurtosis(std::span<const double> xs);

/// Linear-interpolated quantile of unsorted data (Hyndman-Fan type 7).
double quantile(std::vector<double> xs, double q);

/// Same, on already-sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace perpsieve::stats
