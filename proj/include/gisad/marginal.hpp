#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace gisad {

inline constexpr double kDefaultDerivativeFloor = 1e-6;

/// Value of a 1D transform and the natural log of its (floored) derivative.
struct MarginalEval {
  double value;
  double log_deriv;
};

/// Value of a 1D transform and its floored derivative (not logged).
struct MarginalSlope {
  double value;
  double deriv;
};

/// Monotone map of one real dimension onto a Gaussianized coordinate.
///
/// Between knots the map is a monotone cubic Hermite interpolant
/// (weighted harmonic-mean node slopes); outside the knot range it continues
/// linearly with the tail slopes, which also serve as the end-knot slopes so
/// the map is C1 everywhere. Derivatives reported to callers are clamped
/// from below at derivative_floor.
class Marginal1DTransform {
 public:
  Marginal1DTransform() = default;

  /// Throws InputError unless both knot vectors are strictly increasing,
  /// of equal length >= 2, and tail slopes and floor are positive.
  Marginal1DTransform(std::vector<double> knots_in, std::vector<double> knots_out,
                      std::pair<double, double> tail_slopes,
                      double derivative_floor = kDefaultDerivativeFloor);

  static Marginal1DTransform identity(double derivative_floor = kDefaultDerivativeFloor);
  /// psi(y) = scale * y + shift, scale > 0.
  static Marginal1DTransform affine(double scale, double shift = 0.0,
                                    double derivative_floor = kDefaultDerivativeFloor);

  MarginalEval apply(double y) const;
  MarginalSlope value_and_slope(double y) const;
  double invert(double z) const;

  const std::vector<double>& knots_in() const { return knots_in_; }
  const std::vector<double>& knots_out() const { return knots_out_; }
  std::pair<double, double> tail_slopes() const { return {tail_lo_, tail_hi_}; }
  double derivative_floor() const { return floor_; }

 private:
  std::size_t interval_of(double y) const;
  double hermite_value(std::size_t i, double y) const;
  double hermite_slope(std::size_t i, double y) const;

  std::vector<double> knots_in_;
  std::vector<double> knots_out_;
  std::vector<double> node_slopes_;
  double tail_lo_ = 1.0;
  double tail_hi_ = 1.0;
  double floor_ = kDefaultDerivativeFloor;
};

inline constexpr double kDefaultQuantileSmoothing = 4.0;

/// Fits a Gaussianizing marginal transform to samples. Knots sit at
/// smoothed empirical quantiles for equispaced probability levels
/// p_j = (j + 0.5) / knots and map onto the standard normal quantiles of
/// those levels. The quantiles are kernel estimates whose Gaussian bandwidth
/// in probability is `smoothing` knot spacings. Requires at least 2 * knots
/// finite samples with a non-degenerate spread.
Marginal1DTransform fit_marginal_transform(std::span<const double> samples, std::size_t knots,
                                           double derivative_floor = kDefaultDerivativeFloor,
                                           double smoothing = kDefaultQuantileSmoothing);

MarginalEval apply_marginal(const Marginal1DTransform& t, double y);
double invert_marginal(const Marginal1DTransform& t, double z);

/// Order-1 Wasserstein distance between the empirical distribution of
/// samples and N(0, 1), by quantile matching at midpoint plotting positions.
double wasserstein_1d_to_gaussian(std::span<const double> samples);

/// Same distance for samples already sorted ascending, with the matching
/// reference quantiles precomputed by midpoint_normal_quantiles(n).
double wasserstein_sorted_to_gaussian(std::span<const double> sorted,
                                      std::span<const double> reference);

}  // namespace gisad
