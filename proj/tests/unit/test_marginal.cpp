#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gisad/errors.hpp"
#include "gisad/marginal.hpp"
#include "gisad/normal.hpp"
#include "oracles.hpp"

using namespace gisad;

namespace {

std::vector<double> normal_draws(std::size_t n, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_SUITE("marginal") {

TEST_CASE("normal quantile agrees with a bisection oracle") {
  for (double p : {1e-10, 0.001, 0.25, 0.5, 0.75, 0.975, 1.0 - 1e-9}) {
    CHECK(normal_quantile(p) == doctest::Approx(oracle::normal_quantile(p)).epsilon(1e-9));
  }
  CHECK(normal_cdf(normal_quantile(0.3)) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK_THROWS_AS(normal_quantile(0.0), InputError);
  CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

TEST_CASE("identity and affine transforms") {
  const auto id = Marginal1DTransform::identity();
  const MarginalEval e = apply_marginal(id, 0.7);
  CHECK(e.value == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(std::abs(e.log_deriv) < 1e-15);
  CHECK(invert_marginal(id, -1.3) == doctest::Approx(-1.3).epsilon(1e-15));

  const auto twice = Marginal1DTransform::affine(2.0);
  const MarginalEval t = apply_marginal(twice, 1.0);
  CHECK(t.value == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(t.log_deriv == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(invert_marginal(twice, 3.0) == doctest::Approx(1.5).epsilon(1e-15));
  // Far outside the knots the tails carry the same slope.
  CHECK(apply_marginal(twice, -50.0).value == doctest::Approx(-100.0).epsilon(1e-14));
}

TEST_CASE("constructor rejects broken knots") {
  CHECK_THROWS_AS(Marginal1DTransform({0.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}), InputError);
  CHECK_THROWS_AS(Marginal1DTransform({0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}), InputError);
  CHECK_THROWS_AS(Marginal1DTransform({0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}), InputError);
  CHECK_THROWS_AS(Marginal1DTransform({0.0}, {0.0}, {1.0, 1.0}), InputError);
  CHECK_THROWS_AS(Marginal1DTransform({0.0, 1.0}, {0.0, 1.0}, {1.0, 1.0}, 0.0), InputError);
}

TEST_CASE("Gaussian samples give a near-identity transform") {
  const auto t = fit_marginal_transform(normal_draws(100000, 0.0, 1), 64);
  double worst = 0.0;
  for (double y = -2.0; y <= 2.0; y += 0.01) {
    worst = std::max(worst, std::abs(apply_marginal(t, y).value - y));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("log-normal samples are Gaussianized by the log") {
  auto s = normal_draws(100000, 0.0, 2);
  for (double& v : s) v = std::exp(v);
  const auto t = fit_marginal_transform(s, 64);
  double worst = 0.0;
  for (double y = 0.5; y <= 2.0; y += 0.01) {
    worst = std::max(worst, std::abs(apply_marginal(t, y).value - std::log(y)));
  }
  CHECK(worst < 0.05);
  CHECK(std::abs(apply_marginal(t, 1.0).value) < 0.05);
}

TEST_CASE("knots sit at equispaced levels mapped to normal quantiles") {
  const std::size_t k = 16;
  const auto t = fit_marginal_transform(normal_draws(5000, 0.0, 3), k);
  REQUIRE(t.knots_out().size() == k);
  for (std::size_t j = 0; j < k; ++j) {
    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
    CHECK(t.knots_out()[j] == doctest::Approx(oracle::normal_quantile(p)).epsilon(1e-12));
  }
  CHECK(std::is_sorted(t.knots_in().begin(), t.knots_in().end()));
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(fit_marginal_transform(std::vector<double>(500, 3.0), 16), FitError);
  CHECK_THROWS_AS(fit_marginal_transform(normal_draws(31, 0.0, 4), 16), FitError);
  auto s = normal_draws(100, 0.0, 5);
  s[17] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_marginal_transform(s, 16), InputError);
  CHECK_THROWS_AS(apply_marginal(Marginal1DTransform::identity(), INFINITY), InputError);
}

TEST_CASE("fitted transform: monotone, floored derivative, C1 at the knot ends") {
  auto s = normal_draws(4000, 0.0, 6);
  for (double& v : s) v = v < 0 ? 0.3 * v : v * v;  // skewed with a kink
  const auto t = fit_marginal_transform(s, 32);
  double prev = -INFINITY;
  for (double y = -5.0; y <= 20.0; y += 0.003) {
    const MarginalEval e = apply_marginal(t, y);
    CHECK(e.value > prev);
    CHECK(e.log_deriv >= std::log(t.derivative_floor()) - 1e-12);
    prev = e.value;
  }
  for (double knot : {t.knots_in().front(), t.knots_in().back()}) {
    const double h = 1e-7;
    const double below = apply_marginal(t, knot - h).value;
    const double above = apply_marginal(t, knot + h).value;
    CHECK(std::abs(above - below) < 1e-5);
    const double s_below = std::exp(apply_marginal(t, knot - h).log_deriv);
    const double s_above = std::exp(apply_marginal(t, knot + h).log_deriv);
    CHECK(s_below == doctest::Approx(s_above).epsilon(1e-4));
  }
}

TEST_CASE("inverse round trip") {
  auto s = normal_draws(20000, 0.0, 7);
  for (double& v : s) v = std::exp(0.7 * v);
  const auto t = fit_marginal_transform(s, 64);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double z = g(rng);
    const double back = apply_marginal(t, invert_marginal(t, z)).value;
    worst = std::max(worst, std::abs(back - z) / std::max(1.0, std::abs(z)));
  }
  CHECK(worst < 1e-9);
  // apply then invert on the knot range
  for (std::size_t j = 0; j < t.knots_in().size(); ++j) {
    const double y = t.knots_in()[j] * 1.0001;
    CHECK(invert_marginal(t, apply_marginal(t, y).value) == doctest::Approx(y).epsilon(1e-9));
  }
}

TEST_CASE("Wasserstein distance to the standard normal") {
  CHECK(wasserstein_1d_to_gaussian(normal_draws(100000, 0.0, 9)) < 0.02);
  CHECK(wasserstein_1d_to_gaussian(normal_draws(100000, 2.0, 10)) == doctest::Approx(2.0).epsilon(0.01));

  const double q1 = oracle::normal_quantile(0.25);
  const double q3 = oracle::normal_quantile(0.75);
  const double expected = (std::abs(-1.0 - q1) + std::abs(1.0 - q3)) / 2.0;
  CHECK(expected == doctest::Approx(0.3255).epsilon(1e-3));
  const std::vector<double> two{1.0, -1.0};
  CHECK(wasserstein_1d_to_gaussian(two) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(wasserstein_1d_to_gaussian(std::vector<double>{0.5}), InputError);
}

}
