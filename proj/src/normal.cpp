#include "gisad/normal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include "gisad/errors.hpp"

namespace gisad {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("normal_quantile: p must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

std::vector<double> midpoint_normal_quantiles(std::size_t n) {
  std::vector<double> q(n);
  const double dn = static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) q[j] = normal_quantile((static_cast<double>(j) + 0.5) / dn);
  return q;
}

}  // namespace gisad
