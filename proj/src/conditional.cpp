#include "gisad/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gisad/errors.hpp"

namespace gisad {

ConditionalBinning::ConditionalBinning(std::vector<double> edges) : edges_(std::move(edges)) {
  if (edges_.size() < 2) throw InputError("binning needs at least two edges");
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!std::isfinite(edges_[i])) throw InputError("binning edge is not finite");
    if (i > 0 && !(edges_[i] > edges_[i - 1])) {
      throw InputError("binning edges must be strictly increasing");
    }
  }
  centers_.resize(edges_.size() - 1);
  for (std::size_t b = 0; b + 1 < edges_.size(); ++b) {
    centers_[b] = 0.5 * (edges_[b] + edges_[b + 1]);
  }
}

double ConditionalBinning::clamp(double m) const { return std::clamp(m, lo(), hi()); }

std::size_t ConditionalBinning::bin_of(double m) const {
  const double c = clamp(m);
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), c);
  const auto idx = static_cast<std::size_t>(std::distance(edges_.begin(), it));
  return std::min(idx == 0 ? 0 : idx - 1, n_bins() - 1);
}

ConditionalBinning build_binning(std::span<const double> m_values, std::size_t n_bins,
                                 std::size_t min_occupancy) {
  if (n_bins < 2) throw FitError("build_binning: need at least 2 bins");
  for (double m : m_values) {
    if (!std::isfinite(m)) throw InputError("build_binning: non-finite conditional value");
  }
  const std::size_t n = m_values.size();
  min_occupancy = std::max<std::size_t>(min_occupancy, 1);
  if (n < n_bins * min_occupancy) {
    throw FitError("build_binning: " + std::to_string(n_bins) + " bins exceed " +
                   std::to_string(n) + " samples / " + std::to_string(min_occupancy) +
                   " minimum per bin");
  }
  std::vector<double> sorted(m_values.begin(), m_values.end());
  std::sort(sorted.begin(), sorted.end());
  if (!(sorted.back() > sorted.front())) {
    throw FitError("build_binning: conditional values span a zero range");
  }
  std::vector<double> edges(n_bins + 1);
  edges.front() = sorted.front();
  edges.back() = sorted.back();
  for (std::size_t b = 1; b < n_bins; ++b) {
    const std::size_t k = b * n / n_bins;  // samples in bins [0, b)
    edges[b] = 0.5 * (sorted[k - 1] + sorted[k]);
    if (!(edges[b] > edges[b - 1])) {
      throw FitError("build_binning: tied conditional values collapse bin " + std::to_string(b));
    }
  }
  if (!(edges[n_bins] > edges[n_bins - 1])) {
    throw FitError("build_binning: tied conditional values collapse the last bin");
  }
  return ConditionalBinning(std::move(edges));
}

BinBlend blend_for(const ConditionalBinning& binning, double m) {
  const auto& centers = binning.centers();
  if (!(m > centers.front())) return {0, 0, 0.0};
  if (!(m < centers.back())) return {centers.size() - 1, centers.size() - 1, 0.0};
  const auto it = std::upper_bound(centers.begin(), centers.end(), m);
  const auto upper = static_cast<std::size_t>(std::distance(centers.begin(), it));
  const std::size_t lower = upper - 1;
  const double t = (m - centers[lower]) / (centers[upper] - centers[lower]);
  if (t == 0.0) return {lower, lower, 0.0};
  return {lower, upper, t};
}

MarginalSlope interpolated_value_and_slope(std::span<const Marginal1DTransform> transforms,
                                           const BinBlend& blend, double y) {
  const MarginalSlope a = transforms[blend.lower].value_and_slope(y);
  if (blend.lower == blend.upper) return a;
  const MarginalSlope b = transforms[blend.upper].value_and_slope(y);
  const double s = 1.0 - blend.t;
  return {s * a.value + blend.t * b.value, s * a.deriv + blend.t * b.deriv};
}

MarginalEval interpolated_apply(std::span<const Marginal1DTransform> transforms,
                                const ConditionalBinning& binning, double y, double m) {
  const MarginalSlope v =
      interpolated_value_and_slope(transforms, blend_for(binning, binning.clamp(m)), y);
  return {v.value, std::log(v.deriv)};
}

double interpolated_invert(std::span<const Marginal1DTransform> transforms,
                           const BinBlend& blend, double z) {
  const Marginal1DTransform& a = transforms[blend.lower];
  if (blend.lower == blend.upper) return a.invert(z);
  const Marginal1DTransform& b = transforms[blend.upper];

  // The blend is strictly increasing in y and lies between the two inverses.
  const double ya = a.invert(z);
  const double yb = b.invert(z);
  double lo = std::min(ya, yb);
  double hi = std::max(ya, yb);
  if (lo == hi) return lo;
  double y = std::clamp((1.0 - blend.t) * ya + blend.t * yb, lo, hi);
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z));
  for (int iter = 0; iter < 200; ++iter) {
    const MarginalSlope v = interpolated_value_and_slope(transforms, blend, y);
    const double f = v.value - z;
    if (std::abs(f) <= tol) break;
    if (f > 0.0) {
      hi = y;
    } else {
      lo = y;
    }
    double next = y - f / v.deriv;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == y || hi - lo <= std::numeric_limits<double>::epsilon() * std::abs(y)) break;
    y = next;
  }
  return y;
}

double interpolated_invert(std::span<const Marginal1DTransform> transforms,
                           const ConditionalBinning& binning, double z, double m) {
  return interpolated_invert(transforms, blend_for(binning, binning.clamp(m)), z);
}

}  // namespace gisad
