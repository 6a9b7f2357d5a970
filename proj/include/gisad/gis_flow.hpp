#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gisad/conditional.hpp"
#include "gisad/marginal.hpp"

namespace gisad {

/// n x d sample matrix, one event per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FitConfig {
  std::size_t n_iterations = 100;
  std::size_t slices_per_iteration = 4;
  std::size_t n_direction_candidates = 64;
  std::size_t knots_per_transform = 64;
  double derivative_floor = kDefaultDerivativeFloor;
  /// Kernel bandwidth of the knot quantile estimates, in knot spacings.
  double quantile_smoothing = kDefaultQuantileSmoothing;
  std::uint64_t rng_seed = 0;
  std::size_t n_conditional_bins = 8;
  /// Slice candidates are scored on at most this many rows (0 = all rows).
  std::size_t max_score_samples = 8192;
  /// Worker threads for candidate scoring (0 = all cores). Does not affect results.
  unsigned threads = 1;

  /// Throws ConfigError for zero counts, knots < 8, a non-positive floor, or
  /// more slices than the feature dimension.
  void validate(std::size_t dim) const;
};

/// Defaults used by the CLI for a given feature dimension: 20 iterations per
/// dimension and min(d, 4) slices per iteration.
FitConfig default_fit_config(std::size_t dim);

/// Per-feature affine map u = (x - shift) / scale applied before the first layer.
struct Standardization {
  std::vector<double> shift;
  std::vector<double> scale;
};

/// One flow iteration: x -> x + W (psi(W^T x) - W^T x).
struct GisLayer {
  Eigen::MatrixXd directions;  // d x K, orthonormal columns
  /// transforms[k][b]: marginal transform of slice k in conditional bin b.
  std::vector<std::vector<Marginal1DTransform>> transforms;

  std::size_t n_slices() const { return static_cast<std::size_t>(directions.cols()); }
};

struct IterationStats {
  std::size_t iteration;
  /// Sum over the selected slices of the Wasserstein-1 distance to N(0, 1),
  /// before and after the marginal Gaussianization, on all training rows.
  double w1_before;
  double w1_after;
};

struct ForwardResult {
  Eigen::VectorXd z;
  double log_det;
  bool clamped;  // m was outside the trained conditional range
};

class FlowModel {
 public:
  FlowModel() = default;
  FlowModel(Standardization standardization, ConditionalBinning binning,
            std::vector<GisLayer> layers);

  std::size_t dim() const { return standardization_.shift.size(); }
  const Standardization& standardization() const { return standardization_; }
  const ConditionalBinning& binning() const { return binning_; }
  const std::vector<GisLayer>& layers() const { return layers_; }

  ForwardResult forward(std::span<const double> x, double m) const;
  Eigen::VectorXd inverse(std::span<const double> z, double m) const;
  double log_density(std::span<const double> x, double m) const;

  /// Log-determinant of the standardization step alone.
  double standardization_log_det() const;

 private:
  Standardization standardization_;
  ConditionalBinning binning_;
  std::vector<GisLayer> layers_;
};

/// Applies one layer in place to a standardized point; returns its log-det.
double apply_layer(const GisLayer& layer, const BinBlend& blend, std::span<double> u);
/// Undoes one layer in place.
void invert_layer(const GisLayer& layer, const BinBlend& blend, std::span<double> u);

/// Picks the d x K orthonormal slice whose projected marginals are furthest
/// from N(0, 1) in summed Wasserstein-1 distance. Candidate 0 is the set of
/// the K individually least Gaussian axes; candidates 1..n_candidates are
/// random orthonormal frames drawn from `seed`. Ties go to the lower index.
Eigen::MatrixXd select_slice(const RowMatrix& data, std::size_t slices, std::size_t n_candidates,
                             std::uint64_t seed, unsigned threads = 1);

using ProgressCallback = std::function<void(const IterationStats&)>;

FlowModel fit_gis(const RowMatrix& data, std::span<const double> conditionals,
                  const FitConfig& config, const ProgressCallback& progress = {});

ForwardResult forward(const FlowModel& model, std::span<const double> x, double m);
Eigen::VectorXd inverse(const FlowModel& model, std::span<const double> z, double m);
double log_density(const FlowModel& model, std::span<const double> x, double m);

/// Plain-text "GISFLOW v1" format, 17 significant digits per value.
void save_model(const FlowModel& model, std::ostream& out);
FlowModel load_model(std::istream& in);
void save_model_file(const FlowModel& model, const std::string& path);
FlowModel load_model_file(const std::string& path);

}  // namespace gisad
