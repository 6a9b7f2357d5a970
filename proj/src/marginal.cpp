#include "gisad/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gisad/errors.hpp"
#include "gisad/normal.hpp"

namespace gisad {

namespace {

void require_strictly_increasing(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InputError(std::string(what) + " contains a non-finite value");
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) throw InputError(std::string(what) + " must be strictly increasing");
  }
}

}  // namespace

Marginal1DTransform::Marginal1DTransform(std::vector<double> knots_in,
                                         std::vector<double> knots_out,
                                         std::pair<double, double> tail_slopes,
                                         double derivative_floor)
    : knots_in_(std::move(knots_in)),
      knots_out_(std::move(knots_out)),
      tail_lo_(tail_slopes.first),
      tail_hi_(tail_slopes.second),
      floor_(derivative_floor) {
  if (knots_in_.size() != knots_out_.size() || knots_in_.size() < 2) {
    throw InputError("marginal transform needs two equal-length knot vectors of size >= 2");
  }
  require_strictly_increasing(knots_in_, "knots_in");
  require_strictly_increasing(knots_out_, "knots_out");
  if (!(tail_lo_ > 0.0) || !(tail_hi_ > 0.0) || !std::isfinite(tail_lo_) ||
      !std::isfinite(tail_hi_)) {
    throw InputError("tail slopes must be positive and finite");
  }
  if (!(floor_ > 0.0)) throw InputError("derivative floor must be positive");

  const std::size_t n = knots_in_.size();
  std::vector<double> secant(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    secant[i] = (knots_out_[i + 1] - knots_out_[i]) / (knots_in_[i + 1] - knots_in_[i]);
  }
  node_slopes_.assign(n, 0.0);
  node_slopes_.front() = std::min(tail_lo_, 3.0 * secant.front());
  node_slopes_.back() = std::min(tail_hi_, 3.0 * secant.back());
  // Weighted harmonic mean of neighbouring secants keeps each cubic piece monotone.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = knots_in_[i] - knots_in_[i - 1];
    const double h1 = knots_in_[i + 1] - knots_in_[i];
    const double w1 = 2.0 * h1 + h0;
    const double w2 = h1 + 2.0 * h0;
    node_slopes_[i] = (w1 + w2) / (w1 / secant[i - 1] + w2 / secant[i]);
  }
}

Marginal1DTransform Marginal1DTransform::identity(double derivative_floor) {
  return affine(1.0, 0.0, derivative_floor);
}

Marginal1DTransform Marginal1DTransform::affine(double scale, double shift,
                                                double derivative_floor) {
  return Marginal1DTransform({-1.0, 1.0}, {shift - scale, shift + scale}, {scale, scale},
                             derivative_floor);
}

std::size_t Marginal1DTransform::interval_of(double y) const {
  const auto it = std::upper_bound(knots_in_.begin(), knots_in_.end(), y);
  const auto idx = static_cast<std::size_t>(std::distance(knots_in_.begin(), it));
  return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, knots_in_.size() - 2);
}

double Marginal1DTransform::hermite_value(std::size_t i, double y) const {
  const double h = knots_in_[i + 1] - knots_in_[i];
  const double t = (y - knots_in_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2.0 * t3 - 3.0 * t2 + 1.0) * knots_out_[i] + (t3 - 2.0 * t2 + t) * h * node_slopes_[i] +
         (-2.0 * t3 + 3.0 * t2) * knots_out_[i + 1] + (t3 - t2) * h * node_slopes_[i + 1];
}

double Marginal1DTransform::hermite_slope(std::size_t i, double y) const {
  const double h = knots_in_[i + 1] - knots_in_[i];
  const double t = (y - knots_in_[i]) / h;
  const double t2 = t * t;
  return (6.0 * t2 - 6.0 * t) * (knots_out_[i] - knots_out_[i + 1]) / h +
         (3.0 * t2 - 4.0 * t + 1.0) * node_slopes_[i] + (3.0 * t2 - 2.0 * t) * node_slopes_[i + 1];
}

MarginalSlope Marginal1DTransform::value_and_slope(double y) const {
  if (y < knots_in_.front()) {
    return {knots_out_.front() + tail_lo_ * (y - knots_in_.front()), std::max(tail_lo_, floor_)};
  }
  if (y > knots_in_.back()) {
    return {knots_out_.back() + tail_hi_ * (y - knots_in_.back()), std::max(tail_hi_, floor_)};
  }
  const std::size_t i = interval_of(y);
  return {hermite_value(i, y), std::max(hermite_slope(i, y), floor_)};
}

MarginalEval Marginal1DTransform::apply(double y) const {
  const MarginalSlope s = value_and_slope(y);
  return {s.value, std::log(s.deriv)};
}

double Marginal1DTransform::invert(double z) const {
  if (z < knots_out_.front()) return knots_in_.front() + (z - knots_out_.front()) / tail_lo_;
  if (z > knots_out_.back()) return knots_in_.back() + (z - knots_out_.back()) / tail_hi_;

  const auto it = std::upper_bound(knots_out_.begin(), knots_out_.end(), z);
  auto i = static_cast<std::size_t>(std::distance(knots_out_.begin(), it));
  i = std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, knots_out_.size() - 2);

  // Safeguarded Newton on the bracketing cubic piece.
  double lo = knots_in_[i];
  double hi = knots_in_[i + 1];
  const double span_out = knots_out_[i + 1] - knots_out_[i];
  double y = lo + (z - knots_out_[i]) / span_out * (hi - lo);
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z));
  for (int iter = 0; iter < 200; ++iter) {
    const double f = hermite_value(i, y) - z;
    if (std::abs(f) <= tol) break;
    if (f > 0.0) {
      hi = y;
    } else {
      lo = y;
    }
    const double slope = hermite_slope(i, y);
    double next = slope > 0.0 ? y - f / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == y || hi - lo <= std::numeric_limits<double>::epsilon() * std::abs(y)) break;
    y = next;
  }
  return y;
}

Marginal1DTransform fit_marginal_transform(std::span<const double> samples, std::size_t knots,
                                           double derivative_floor, double smoothing) {
  if (knots < 2) throw InputError("fit_marginal_transform: need at least 2 knots");
  for (double v : samples) {
    if (!std::isfinite(v)) throw InputError("fit_marginal_transform: non-finite sample");
  }
  if (samples.size() < 2 * knots) {
    throw FitError("fit_marginal_transform: " + std::to_string(samples.size()) +
                   " samples, need at least " + std::to_string(2 * knots));
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double spread = sorted.back() - sorted.front();
  if (!(spread > 0.0)) throw FitError("fit_marginal_transform: degenerate (zero-variance) samples");

  const std::size_t n = sorted.size();
  const double dn = static_cast<double>(n);
  const double spacing = 1.0 / static_cast<double>(knots);

  // Kernel averaging of a curved quantile function is biased outward. Each
  // knot is instead a kernel-weighted local linear fit of the order
  // statistics against normal scores, evaluated at the knot's score, which
  // is unbiased wherever the sample is locally Gaussian in shape. Repeated
  // layers on already Gaussian data then leave it unchanged on average.
  const std::vector<double> scores = midpoint_normal_quantiles(n);

  std::vector<double> in;
  std::vector<double> out;
  in.reserve(knots);
  out.reserve(knots);
  const double min_gap = 1e-9 * spread;
  for (std::size_t j = 0; j < knots; ++j) {
    const double p = (static_cast<double>(j) + 0.5) * spacing;
    // Kernel quantile estimate: order statistics weighted by a Gaussian in
    // probability, narrowed near 0 and 1 so the kernel stays inside (0, 1).
    const double bw = std::max(std::min({smoothing * spacing, p / 3.0, (1.0 - p) / 3.0}),
                               0.5 / dn);
    const double lo_p = std::max(0.0, p - 5.0 * bw);
    const double hi_p = std::min(1.0, p + 5.0 * bw);
    const auto first = static_cast<std::size_t>(std::floor(lo_p * dn));
    const auto last = std::min(n - 1, static_cast<std::size_t>(std::ceil(hi_p * dn)));
    const double z = normal_quantile(p);
    double sw = 0.0;
    double sy = 0.0;
    double sg = 0.0;
    double sgg = 0.0;
    double sgy = 0.0;
    double cdf_lo = normal_cdf((static_cast<double>(first) / dn - p) / bw);
    for (std::size_t i = first; i <= last; ++i) {
      const double cdf_hi = normal_cdf((static_cast<double>(i + 1) / dn - p) / bw);
      const double w = cdf_hi - cdf_lo;
      sw += w;
      sy += w * sorted[i];
      const double g = scores[i] - z;
      sg += w * g;
      sgg += w * g * g;
      sgy += w * g * sorted[i];
      cdf_lo = cdf_hi;
    }
    const double g_mean = sg / sw;
    const double y_mean = sy / sw;
    const double g_var = sgg / sw - g_mean * g_mean;
    const double slope = g_var > 0.0 ? (sgy / sw - g_mean * y_mean) / g_var : 0.0;
    const double q = y_mean - slope * g_mean;
    if (!in.empty() && !(q > in.back() + min_gap)) continue;
    in.push_back(q);
    out.push_back(z);
  }
  if (in.size() < 2) throw FitError("fit_marginal_transform: samples too concentrated to fit");

  const std::size_t m = in.size();
  const double lo_slope = (out[1] - out[0]) / (in[1] - in[0]);
  const double hi_slope = (out[m - 1] - out[m - 2]) / (in[m - 1] - in[m - 2]);
  return Marginal1DTransform(std::move(in), std::move(out), {lo_slope, hi_slope},
                             derivative_floor);
}

MarginalEval apply_marginal(const Marginal1DTransform& t, double y) {
  if (!std::isfinite(y)) throw InputError("apply_marginal: non-finite input");
  return t.apply(y);
}

double invert_marginal(const Marginal1DTransform& t, double z) {
  if (!std::isfinite(z)) throw InputError("invert_marginal: non-finite input");
  return t.invert(z);
}

double wasserstein_sorted_to_gaussian(std::span<const double> sorted,
                                      std::span<const double> reference) {
  double acc = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) acc += std::abs(sorted[j] - reference[j]);
  return acc / static_cast<double>(sorted.size());
}

double wasserstein_1d_to_gaussian(std::span<const double> samples) {
  if (samples.size() < 2) throw InputError("wasserstein_1d_to_gaussian: need at least 2 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw InputError("wasserstein_1d_to_gaussian: non-finite sample");
  }
  std::sort(sorted.begin(), sorted.end());
  const auto reference = midpoint_normal_quantiles(sorted.size());
  return wasserstein_sorted_to_gaussian(sorted, reference);
}

}  // namespace gisad
