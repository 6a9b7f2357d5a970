#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gisad/marginal.hpp"

namespace gisad {

/// Partition of the conditional variable into contiguous bins. Bin b covers
/// [edges[b], edges[b+1]); the last bin is closed on the right.
class ConditionalBinning {
 public:
  ConditionalBinning() = default;
  /// Throws InputError unless edges has >= 2 strictly increasing finite values.
  explicit ConditionalBinning(std::vector<double> edges);

  std::size_t n_bins() const { return centers_.size(); }
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& centers() const { return centers_; }
  double lo() const { return edges_.front(); }
  double hi() const { return edges_.back(); }

  bool contains(double m) const { return m >= lo() && m <= hi(); }
  double clamp(double m) const;
  /// Bin index of m after clamping to the range.
  std::size_t bin_of(double m) const;

 private:
  std::vector<double> edges_;
  std::vector<double> centers_;
};

/// Equal-occupancy bins over m_values. Throws FitError for a zero range,
/// n_bins < 2, too few samples for min_occupancy per bin, or tied values that
/// collapse an edge.
ConditionalBinning build_binning(std::span<const double> m_values, std::size_t n_bins,
                                 std::size_t min_occupancy = 1);

/// Linear blend between the transforms of the two bin centers bracketing m:
/// weight (1 - t) on `lower`, t on `upper`.
struct BinBlend {
  std::size_t lower;
  std::size_t upper;
  double t;
};

BinBlend blend_for(const ConditionalBinning& binning, double m);

/// Interpolates per-bin transform outputs (and derivatives) at conditional m.
/// transforms holds one transform per bin for a single slice.
MarginalEval interpolated_apply(std::span<const Marginal1DTransform> transforms,
                                const ConditionalBinning& binning, double y, double m);

MarginalSlope interpolated_value_and_slope(std::span<const Marginal1DTransform> transforms,
                                           const BinBlend& blend, double y);

/// Inverse of interpolated_apply in y for fixed m.
double interpolated_invert(std::span<const Marginal1DTransform> transforms,
                           const ConditionalBinning& binning, double z, double m);

double interpolated_invert(std::span<const Marginal1DTransform> transforms,
                           const BinBlend& blend, double z);

}  // namespace gisad
