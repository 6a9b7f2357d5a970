#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace gisad {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF; p must lie strictly inside (0, 1).
double normal_quantile(double p);

inline double normal_log_pdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Standard normal quantiles at midpoint plotting positions (j - 0.5) / n,
/// j = 1..n.
std::vector<double> midpoint_normal_quantiles(std::size_t n);

}  // namespace gisad
