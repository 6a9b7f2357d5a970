#include "gisad/gis_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gisad/errors.hpp"
#include "gisad/normal.hpp"
#include "gisad/parallel.hpp"

namespace gisad {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

double column_w1(const RowMatrix& m, Eigen::Index col, std::vector<double>& scratch,
                 std::span<const double> reference) {
  scratch.resize(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) scratch[static_cast<std::size_t>(i)] = m(i, col);
  std::sort(scratch.begin(), scratch.end());
  return wasserstein_sorted_to_gaussian(scratch, reference);
}

double slice_score(const RowMatrix& data, const Eigen::MatrixXd& w,
                   std::span<const double> reference) {
  const RowMatrix projected = data * w;
  std::vector<double> scratch;
  double total = 0.0;
  for (Eigen::Index k = 0; k < projected.cols(); ++k) {
    total += column_w1(projected, k, scratch, reference);
  }
  return total;
}

Eigen::MatrixXd random_frame(std::size_t d, std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = gauss(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
}

void require_finite(const RowMatrix& data, std::span<const double> conditionals) {
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (!std::isfinite(data(i, j))) {
        throw InputError("non-finite feature at row " + std::to_string(i) + ", column " +
                         std::to_string(j));
      }
    }
  }
  for (std::size_t i = 0; i < conditionals.size(); ++i) {
    if (!std::isfinite(conditionals[i])) {
      throw InputError("non-finite conditional value at row " + std::to_string(i));
    }
  }
}

// No bin has data beyond its outer knots, so the extrapolation slopes are
// pooled (geometric mean) to keep the tails consistent along m.
void share_tail_slopes(std::vector<Marginal1DTransform>& per_bin) {
  if (per_bin.size() < 2) return;
  double log_lo = 0.0;
  double log_hi = 0.0;
  for (const auto& t : per_bin) {
    log_lo += std::log(t.tail_slopes().first);
    log_hi += std::log(t.tail_slopes().second);
  }
  const auto nb = static_cast<double>(per_bin.size());
  const std::pair<double, double> pooled{std::exp(log_lo / nb), std::exp(log_hi / nb)};
  for (auto& t : per_bin) {
    t = Marginal1DTransform(t.knots_in(), t.knots_out(), pooled, t.derivative_floor());
  }
}

}  // namespace

void FitConfig::validate(std::size_t dim) const {
  if (slices_per_iteration == 0 || n_direction_candidates == 0 || n_conditional_bins == 0) {
    throw ConfigError("fit config: counts must be positive");
  }
  if (knots_per_transform < 8) throw ConfigError("fit config: knots_per_transform must be >= 8");
  if (!(derivative_floor > 0.0)) throw ConfigError("fit config: derivative_floor must be > 0");
  if (!(quantile_smoothing > 0.0)) {
    throw ConfigError("fit config: quantile_smoothing must be > 0");
  }
  if (slices_per_iteration > dim) {
    throw ConfigError("fit config: slices_per_iteration (" + std::to_string(slices_per_iteration) +
                      ") exceeds feature dimension " + std::to_string(dim));
  }
}

FitConfig default_fit_config(std::size_t dim) {
  FitConfig cfg;
  cfg.n_iterations = 20 * dim;
  cfg.slices_per_iteration = std::min<std::size_t>(dim, 4);
  return cfg;
}

FlowModel::FlowModel(Standardization standardization, ConditionalBinning binning,
                     std::vector<GisLayer> layers)
    : standardization_(std::move(standardization)),
      binning_(std::move(binning)),
      layers_(std::move(layers)) {
  const std::size_t d = standardization_.shift.size();
  if (d == 0 || standardization_.scale.size() != d) {
    throw InputError("flow model: standardization size mismatch");
  }
  for (double s : standardization_.scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("flow model: scale must be positive");
  }
  for (const auto& layer : layers_) {
    if (static_cast<std::size_t>(layer.directions.rows()) != d ||
        layer.transforms.size() != layer.n_slices()) {
      throw InputError("flow model: layer shape mismatch");
    }
    for (const auto& per_bin : layer.transforms) {
      if (per_bin.size() != binning_.n_bins()) {
        throw InputError("flow model: layer has wrong number of conditional bins");
      }
    }
  }
}

double FlowModel::standardization_log_det() const {
  double acc = 0.0;
  for (double s : standardization_.scale) acc -= std::log(s);
  return acc;
}

double apply_layer(const GisLayer& layer, const BinBlend& blend, std::span<double> u) {
  const Eigen::MatrixXd& w = layer.directions;
  const auto d = w.rows();
  double log_det = 0.0;
  for (Eigen::Index k = 0; k < w.cols(); ++k) {
    double y = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) y += w(j, k) * u[static_cast<std::size_t>(j)];
    // Columns are orthonormal, so updating u along column k leaves the
    // projections onto the other columns unchanged.
    const MarginalSlope v =
        interpolated_value_and_slope(layer.transforms[static_cast<std::size_t>(k)], blend, y);
    const double delta = v.value - y;
    for (Eigen::Index j = 0; j < d; ++j) u[static_cast<std::size_t>(j)] += w(j, k) * delta;
    log_det += std::log(v.deriv);
  }
  return log_det;
}

void invert_layer(const GisLayer& layer, const BinBlend& blend, std::span<double> u) {
  const Eigen::MatrixXd& w = layer.directions;
  const auto d = w.rows();
  for (Eigen::Index k = w.cols() - 1; k >= 0; --k) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) s += w(j, k) * u[static_cast<std::size_t>(j)];
    const double y =
        interpolated_invert(layer.transforms[static_cast<std::size_t>(k)], blend, s);
    const double delta = s - y;
    for (Eigen::Index j = 0; j < d; ++j) u[static_cast<std::size_t>(j)] -= w(j, k) * delta;
  }
}

ForwardResult FlowModel::forward(std::span<const double> x, double m) const {
  const std::size_t d = dim();
  if (x.size() != d) throw InputError("forward: dimension mismatch");
  if (!std::isfinite(m)) throw InputError("forward: non-finite conditional");
  ForwardResult out{Eigen::VectorXd(static_cast<Eigen::Index>(d)), standardization_log_det(),
                    !binning_.contains(m)};
  std::span<double> u(out.z.data(), d);
  for (std::size_t j = 0; j < d; ++j) {
    if (!std::isfinite(x[j])) throw InputError("forward: non-finite feature");
    u[j] = (x[j] - standardization_.shift[j]) / standardization_.scale[j];
  }
  const BinBlend blend = blend_for(binning_, binning_.clamp(m));
  for (const auto& layer : layers_) out.log_det += apply_layer(layer, blend, u);
  return out;
}

Eigen::VectorXd FlowModel::inverse(std::span<const double> z, double m) const {
  const std::size_t d = dim();
  if (z.size() != d) throw InputError("inverse: dimension mismatch");
  if (!std::isfinite(m)) throw InputError("inverse: non-finite conditional");
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  std::span<double> u(x.data(), d);
  for (std::size_t j = 0; j < d; ++j) {
    if (!std::isfinite(z[j])) throw InputError("inverse: non-finite input");
    u[j] = z[j];
  }
  const BinBlend blend = blend_for(binning_, binning_.clamp(m));
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) invert_layer(*it, blend, u);
  for (std::size_t j = 0; j < d; ++j) {
    u[j] = u[j] * standardization_.scale[j] + standardization_.shift[j];
  }
  return x;
}

double FlowModel::log_density(std::span<const double> x, double m) const {
  const ForwardResult f = forward(x, m);
  double lp = f.log_det;
  for (Eigen::Index j = 0; j < f.z.size(); ++j) lp += normal_log_pdf(f.z(j));
  return lp;
}

ForwardResult forward(const FlowModel& model, std::span<const double> x, double m) {
  return model.forward(x, m);
}

Eigen::VectorXd inverse(const FlowModel& model, std::span<const double> z, double m) {
  return model.inverse(z, m);
}

double log_density(const FlowModel& model, std::span<const double> x, double m) {
  return model.log_density(x, m);
}

Eigen::MatrixXd select_slice(const RowMatrix& data, std::size_t slices, std::size_t n_candidates,
                             std::uint64_t seed, unsigned threads) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (slices == 0 || slices > d) {
    throw InputError("select_slice: slice count must be in [1, " + std::to_string(d) + "]");
  }
  if (n <= d) throw InputError("select_slice: need more rows than dimensions");
  if (n_candidates == 0) throw InputError("select_slice: need at least one candidate");

  const std::vector<double> reference = midpoint_normal_quantiles(n);

  // Axis candidate: the K individually least Gaussian coordinates.
  std::vector<double> axis_scores(d);
  {
    std::vector<double> scratch;
    for (std::size_t j = 0; j < d; ++j) {
      axis_scores[j] = column_w1(data, static_cast<Eigen::Index>(j), scratch, reference);
    }
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return axis_scores[a] > axis_scores[b]; });
  order.resize(slices);
  std::sort(order.begin(), order.end());

  std::vector<Eigen::MatrixXd> candidates;
  candidates.reserve(n_candidates + 1);
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(slices));
  for (std::size_t k = 0; k < slices; ++k) {
    axes(static_cast<Eigen::Index>(order[k]), static_cast<Eigen::Index>(k)) = 1.0;
  }
  candidates.push_back(std::move(axes));
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < n_candidates; ++c) candidates.push_back(random_frame(d, slices, rng));

  std::vector<double> scores(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) scores[c] = slice_score(data, candidates[c], reference);
  });

  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return candidates[best];
}

FlowModel fit_gis(const RowMatrix& data, std::span<const double> conditionals,
                  const FitConfig& config, const ProgressCallback& progress) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (d == 0) throw InputError("fit_gis: zero feature dimension");
  config.validate(d);
  if (conditionals.size() != n) throw InputError("fit_gis: conditionals/data row count mismatch");
  require_finite(data, conditionals);
  const std::size_t per_bin = 2 * config.knots_per_transform;
  if (n <= 10 * d) {
    throw FitError("fit_gis: " + std::to_string(n) + " rows, need more than " +
                   std::to_string(10 * d));
  }

  ConditionalBinning binning = build_binning(conditionals, config.n_conditional_bins, per_bin);
  std::vector<std::vector<std::size_t>> bin_rows(binning.n_bins());
  std::vector<BinBlend> blends(n);
  for (std::size_t i = 0; i < n; ++i) {
    bin_rows[binning.bin_of(conditionals[i])].push_back(i);
    blends[i] = blend_for(binning, conditionals[i]);
  }
  for (std::size_t b = 0; b < bin_rows.size(); ++b) {
    if (bin_rows[b].size() < per_bin) {
      throw FitError("fit_gis: conditional bin " + std::to_string(b) + " [" +
                     std::to_string(binning.edges()[b]) + ", " +
                     std::to_string(binning.edges()[b + 1]) + ") has " +
                     std::to_string(bin_rows[b].size()) + " samples, need " +
                     std::to_string(per_bin));
    }
  }

  Standardization standardization{std::vector<double>(d), std::vector<double>(d)};
  RowMatrix x = data;
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = x.col(static_cast<Eigen::Index>(j));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(n - 1);
    if (!(var > 0.0)) {
      throw FitError("fit_gis: feature " + std::to_string(j) + " has zero variance");
    }
    standardization.shift[j] = mean;
    standardization.scale[j] = std::sqrt(var);
    x.col(static_cast<Eigen::Index>(j)) =
        (col.array() - mean) / standardization.scale[j];
  }

  const std::size_t k_slices = config.slices_per_iteration;
  const std::vector<double> reference = midpoint_normal_quantiles(n);
  const bool subsample = config.max_score_samples > 0 && n > config.max_score_samples;
  std::vector<std::size_t> row_order(n);
  std::iota(row_order.begin(), row_order.end(), std::size_t{0});

  std::vector<GisLayer> layers;
  layers.reserve(config.n_iterations);
  std::vector<double> scratch;
  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    const std::uint64_t iter_seed = stream_seed(config.rng_seed, it);
    Eigen::MatrixXd w;
    if (subsample) {
      // Partial Fisher-Yates: the first max_score_samples entries become a
      // uniform random subset of rows.
      std::mt19937_64 rng(stream_seed(iter_seed, 0x5eed));
      const std::size_t s = config.max_score_samples;
      for (std::size_t i = 0; i < s; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(row_order[i], row_order[pick(rng)]);
      }
      RowMatrix sub(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < s; ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(row_order[i]));
      }
      w = select_slice(sub, k_slices, config.n_direction_candidates, iter_seed, config.threads);
    } else {
      w = select_slice(x, k_slices, config.n_direction_candidates, iter_seed, config.threads);
    }

    RowMatrix projected = x * w;
    IterationStats stats{it, 0.0, 0.0};
    for (Eigen::Index k = 0; k < projected.cols(); ++k) {
      stats.w1_before += column_w1(projected, k, scratch, reference);
    }

    GisLayer layer;
    layer.directions = w;
    layer.transforms.assign(k_slices, {});
    std::vector<double> samples;
    for (std::size_t k = 0; k < k_slices; ++k) {
      layer.transforms[k].reserve(binning.n_bins());
      for (std::size_t b = 0; b < binning.n_bins(); ++b) {
        samples.clear();
        for (std::size_t row : bin_rows[b]) {
          samples.push_back(projected(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)));
        }
        try {
          layer.transforms[k].push_back(fit_marginal_transform(
              samples, config.knots_per_transform, config.derivative_floor,
              config.quantile_smoothing));
        } catch (const FitError& e) {
          throw FitError("fit_gis: iteration " + std::to_string(it) + ", slice " +
                         std::to_string(k) + ", conditional bin " + std::to_string(b) + ": " +
                         e.what());
        }
      }
      share_tail_slopes(layer.transforms[k]);
    }

    for (std::size_t i = 0; i < n; ++i) {
      auto row = x.row(static_cast<Eigen::Index>(i));
      for (std::size_t k = 0; k < k_slices; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double y = projected(static_cast<Eigen::Index>(i), kk);
        const double psi = interpolated_value_and_slope(layer.transforms[k], blends[i], y).value;
        row += (psi - y) * w.col(kk).transpose();
        projected(static_cast<Eigen::Index>(i), kk) = psi;
      }
    }
    for (Eigen::Index k = 0; k < projected.cols(); ++k) {
      stats.w1_after += column_w1(projected, k, scratch, reference);
    }

    layers.push_back(std::move(layer));
    if (progress) progress(stats);
  }

  return FlowModel(std::move(standardization), std::move(binning), std::move(layers));
}

}  // namespace gisad
