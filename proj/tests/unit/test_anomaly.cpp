#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gisad/anomaly.hpp"
#include "gisad/errors.hpp"
#include "gisad/synth.hpp"

using namespace gisad;

namespace {

// d = 1 model with one layer whose per-bin transforms are given.
FlowModel one_layer_model(std::vector<double> edges, std::vector<Marginal1DTransform> per_bin) {
  GisLayer layer;
  layer.directions = Eigen::MatrixXd::Identity(1, 1);
  layer.transforms = {std::move(per_bin)};
  return FlowModel({{0.0}, {1.0}}, ConditionalBinning(std::move(edges)), {layer});
}

EventTable events_1d(const std::vector<double>& m, const std::vector<double>& x) {
  EventTable t;
  t.m = m;
  t.x.resize(static_cast<Eigen::Index>(m.size()), 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    t.ids.push_back(static_cast<std::int64_t>(i));
    t.x(static_cast<Eigen::Index>(i), 0) = x[i];
  }
  t.feature_names = {"x"};
  return t;
}

struct FittedToy {
  ToyConfig cfg;
  LabeledDataset data;
  FlowModel model;
  AnomalyReport report;
};

FittedToy fit_toy(std::size_t n_signal, std::size_t bins = 8) {
  FittedToy t;
  t.cfg.n_signal = n_signal;
  t.data = generate_toy(t.cfg);
  FitConfig fc = default_fit_config(1);
  fc.n_conditional_bins = bins;
  t.model = fit_gis(t.data.events.x, t.data.events.m, fc);
  ScoreConfig sc;
  sc.sigma = 1.0;
  t.report = score_events(t.model, t.data.events, sc);
  return t;
}

const FittedToy& null_toy() {
  static const FittedToy t = fit_toy(0);
  return t;
}

const FittedToy& signal_toy() {
  static const FittedToy t = fit_toy(500);
  return t;
}

}  // namespace

TEST_SUITE("anomaly") {

TEST_CASE("background quadrature") {
  ScoreConfig cfg;
  cfg.sigma = 250.0;
  const Quadrature q = background_quadrature(cfg);
  double total = 0.0;
  for (double w : q.weights) total += w;
  CHECK(std::abs(total - 1.0) < 1e-12);
  // Ten points on [-500, 500] at spacing 1000/9; the two inner ones (|d| = 55.6) fall inside 125.
  CHECK(q.offsets.size() == 8);
  for (double d : q.offsets) {
    CHECK(std::abs(d) >= 125.0);
    CHECK(std::abs(d) <= 500.0 + 1e-9);
  }
  CHECK(q.offsets.front() == doctest::Approx(-500.0));
  CHECK(q.offsets.back() == doctest::Approx(500.0));
  for (std::size_t i = 0; i < q.offsets.size(); ++i) {
    const double expect = std::exp(-0.5 * std::pow(q.offsets[i] / 250.0, 2.0));
    CHECK(q.weights[i] / q.weights.front() ==
          doctest::Approx(expect / std::exp(-2.0)).epsilon(1e-12));
  }

  cfg.exclusion_halfwidth = 600.0;
  CHECK_THROWS_AS(background_quadrature(cfg), ConfigError);
  cfg.exclusion_halfwidth = std::nullopt;
  cfg.n_quad = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.n_quad = 10;
  cfg.sigma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.sigma = 1.0;
  cfg.cut_thresholds = {1.0, -2.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("identical bins give alpha of one") {
  const auto t = Marginal1DTransform::affine(1.3, 0.2);
  const FlowModel model = one_layer_model({0.0, 4.0, 7.0, 10.0}, {t, t, t});
  const std::vector<double> m{0.5, 2.0, 5.0, 6.9, 9.8, 3.3};
  const std::vector<double> x{-1.0, 0.0, 0.7, 2.5, -3.0, 1.1};
  ScoreConfig cfg;
  cfg.sigma = 1.5;
  const AnomalyReport r = score_events(model, events_1d(m, x), cfg);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(std::abs(r.alphas[i] - 1.0) < 1e-12);
    CHECK(r.p_signal[i] == doctest::Approx(r.p_background[i]).epsilon(1e-12));
  }
}

TEST_CASE("two-point kernel is the mean of the shifted densities") {
  const FlowModel model = one_layer_model(
      {0.0, 2.0, 4.0, 6.0},
      {Marginal1DTransform::identity(), Marginal1DTransform::affine(2.0, 0.5),
       Marginal1DTransform::affine(0.7, -0.2)});
  ScoreConfig cfg;
  cfg.sigma = 0.6;
  cfg.n_quad = 2;
  cfg.exclusion_halfwidth = 0.0;
  const std::vector<double> x{0.4};
  const double m = 3.1;
  const double lo = std::exp(log_density(model, x, m - 1.2));
  const double hi = std::exp(log_density(model, x, m + 1.2));
  const DensityEstimate b = background_density(model, x, m, cfg);
  CHECK(b.density == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-14));
  CHECK_FALSE(b.clamped);
  CHECK(signal_density(model, x, m) == std::exp(log_density(model, x, m)));

  CHECK(background_density(model, x, 0.5, cfg).clamped);
}

TEST_CASE("vanishing background gives the infinite sentinel") {
  const auto steep = Marginal1DTransform::affine(1000.0);
  const FlowModel model =
      one_layer_model({0.0, 1.0, 2.0, 3.0}, {steep, Marginal1DTransform::identity(), steep});
  ScoreConfig cfg;
  cfg.sigma = 0.5;
  const AnomalyReport r = score_events(model, events_1d({1.5}, {1.0}), cfg);
  CHECK(r.degenerate[0] == 1);
  CHECK(std::isinf(r.alphas[0]));
  CHECK(r.p_signal[0] > 0.0);
}

TEST_CASE("dimension mismatch") {
  const FlowModel model = one_layer_model({0.0, 1.0}, {Marginal1DTransform::identity()});
  EventTable e = events_1d({0.5}, {0.0});
  e.x.resize(1, 2);
  e.x << 0.0, 1.0;
  e.feature_names = {"a", "b"};
  CHECK_THROWS_AS(score_events(model, e, ScoreConfig{}), ConfigError);
}

TEST_CASE("summaries") {
  const EventTable e = events_1d({10.0, 20.0, 30.0, 40.0}, {1.0, 2.0, 3.0, 9.0});

  SUBCASE("three values") {
    const std::vector<std::size_t> sel{0, 1, 2};
    const SelectionSummary s = summarize(e, sel);
    REQUIRE(s.stats.size() == 2);
    CHECK(s.stats[0].name == "m");
    CHECK(s.stats[1].name == "x");
    CHECK(s.stats[1].mean == doctest::Approx(2.0));
    CHECK(s.stats[1].std == doctest::Approx(1.0));
    CHECK(s.stats[1].sem == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(s.stats[0].mean == doctest::Approx(20.0));
    CHECK_FALSE(s.single_event);
  }
  SUBCASE("single event") {
    const std::vector<std::size_t> sel{3};
    const SelectionSummary s = summarize(e, sel);
    CHECK(s.count == 1);
    CHECK(s.single_event);
    CHECK(s.stats[1].mean == 9.0);
    CHECK(s.stats[1].std == 0.0);
    CHECK(s.stats[1].sem == 0.0);
  }
  SUBCASE("empty selection") {
    SelectionSummary s = summarize(e, {});
    CHECK(s.empty());
    s.threshold = 5.0;
    CHECK(format_summary(s, "GeV").find("no events pass cut") != std::string::npos);
  }
  SUBCASE("text block") {
    const std::vector<std::size_t> sel{0, 1, 2};
    SelectionSummary s = summarize(e, sel);
    s.threshold = 1.5;
    const std::string text = format_summary(s, "GeV");
    CHECK(text.find("3 events") != std::string::npos);
    CHECK(text.find("m = 20.0 ± 5.8 GeV") != std::string::npos);
  }
  SUBCASE("window and cuts") {
    const std::vector<double> alphas{1.0, 3.0, 6.0, 2.0};
    CHECK(select_above(alphas, 2.0) == std::vector<std::size_t>{1, 2});
    const std::vector<std::size_t> all{0, 1, 2, 3};
    CHECK(restrict_to_window(e, all, 15.0, 30.0) == std::vector<std::size_t>{1, 2});
  }
}

TEST_CASE("quantile") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({1.0, 2.0}, 0.25) == doctest::Approx(1.25));
  CHECK(quantile({5.0}, 0.99) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), InputError);
}

TEST_CASE("scan bins") {
  const EventTable e = events_1d({0.05, 0.15, 0.18, 0.55}, {0.0, 0.0, 0.0, 0.0});
  AnomalyReport r;
  r.alphas = {1.0, 4.0, 2.0, 7.0};
  const std::vector<ScanBin> scan = scan_profile(r, e, 0.1);
  REQUIRE(scan.size() == 6);
  CHECK(scan[0].m_lo == 0.0);
  CHECK(scan[1].count == 2);
  CHECK(*scan[1].alpha_max == 4.0);
  CHECK(*scan[1].alpha_p99 == doctest::Approx(3.98));
  CHECK(scan[2].count == 0);
  CHECK_FALSE(scan[2].alpha_max.has_value());
  CHECK_FALSE(scan[2].alpha_p99.has_value());
  CHECK(scan_argmax(scan) == std::optional<std::size_t>(5));
  CHECK_THROWS_AS(scan_profile(r, e, 0.0), ConfigError);
  CHECK_FALSE(scan_argmax({}).has_value());
}

TEST_CASE("toy background density") {
  const FittedToy& t = null_toy();
  for (double m : {1.5, 3.0, 5.0, 7.0, 8.5}) {
    const double mu = t.cfg.background_mean(m);
    for (double dx : {-1.0, 0.0, 1.0}) {
      const std::vector<double> x{mu + dx};
      const double ratio = signal_density(t.model, x, m) / t.cfg.background_conditional_density(x[0], m);
      CHECK(ratio > 0.8);
      CHECK(ratio < 1.2);
    }
  }
}

TEST_CASE("smooth toy background scores") {
  const FittedToy& t = null_toy();
  CHECK(quantile(t.report.alphas, 0.5) >= 0.85);
  CHECK(quantile(t.report.alphas, 0.5) <= 1.15);
  const double global = quantile(t.report.alphas, 0.999);
  for (const ScanBin& b : scan_profile(t.report, t.data.events, 0.4)) {
    if (b.alpha_p99) CHECK(*b.alpha_p99 <= 2.0 * global);
  }
}

TEST_CASE("rescaled training data") {
  const FittedToy& t = null_toy();
  RowMatrix doubled = 2.0 * t.data.events.x;
  const FlowModel scaled = fit_gis(doubled, t.data.events.m, default_fit_config(1));
  for (double m : {2.0, 5.0, 8.0}) {
    const std::vector<double> x{t.cfg.background_mean(m) + 0.3};
    const std::vector<double> x2{2.0 * x[0]};
    CHECK(signal_density(scaled, x2, m) ==
          doctest::Approx(0.5 * signal_density(t.model, x, m)).epsilon(1e-9));
  }
}

TEST_CASE("injected signal") {
  const FittedToy& t = signal_toy();
  const auto& r = t.report;

  const std::vector<double> peak{t.cfg.signal_x};
  CHECK(background_density(t.model, peak, t.cfg.signal_m, ScoreConfig{.sigma = 1.0}).density <
        signal_density(t.model, peak, t.cfg.signal_m));

  std::vector<double> bg;
  double sig_sum = 0.0;
  for (std::size_t i = 0; i < r.alphas.size(); ++i) {
    if (t.data.is_signal[i]) {
      sig_sum += r.alphas[i];
    } else {
      bg.push_back(r.alphas[i]);
    }
  }
  const double sig_mean = sig_sum / static_cast<double>(t.data.n_signal());
  CHECK(sig_mean > 1.0);
  CHECK(sig_mean > quantile(bg, 0.95));

  const auto scan = scan_profile(r, t.data.events, 0.8);
  const auto best = scan_argmax(scan);
  REQUIRE(best.has_value());
  CHECK(scan[*best].m_lo <= t.cfg.signal_m);
  CHECK(scan[*best].m_hi > t.cfg.signal_m);
}

TEST_CASE("selections are sorted and nested") {
  const FittedToy& t = signal_toy();
  ScoreConfig cfg;
  cfg.sigma = 1.0;
  cfg.cut_thresholds = {5.0, 1.5, 2.5};
  const AnomalyReport r = score_events(t.model, t.data.events, cfg);
  REQUIRE(r.thresholds == std::vector<double>{1.5, 2.5, 5.0});
  REQUIRE(r.selections.size() == 3);
  for (std::size_t k = 0; k + 1 < 3; ++k) {
    CHECK(std::includes(r.selections[k].begin(), r.selections[k].end(),
                        r.selections[k + 1].begin(), r.selections[k + 1].end()));
    CHECK(r.selections[k + 1].size() < r.selections[k].size());
  }
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(r.selections[k] == select_above(r.alphas, r.thresholds[k]));
    CHECK(r.summaries[k].count == r.selections[k].size());
  }
  CHECK(r.alphas == t.report.alphas);
  for (std::size_t i = 0; i < r.alphas.size(); ++i) {
    if (!r.degenerate[i]) CHECK(r.alphas[i] == r.p_signal[i] / r.p_background[i]);
  }

  cfg.threads = 3;
  const AnomalyReport threaded = score_events(t.model, t.data.events, cfg);
  CHECK(threaded.alphas == r.alphas);
  CHECK(threaded.p_background == r.p_background);
}

TEST_CASE("recovered signal location") {
  // Sixteen conditional bins: with eight, bin-centre interpolation pulls the
  // selected m towards a centre by more than the statistical error.
  const FittedToy t = fit_toy(500, 16);
  const SelectionSummary s = summarize(t.data.events, select_above(t.report.alphas, 2.5));
  REQUIRE(s.count >= 50);
  CHECK(std::abs(s.stats[0].mean - t.cfg.signal_m) < 3.0 * s.stats[0].sem);
  CHECK(std::abs(s.stats[1].mean - t.cfg.signal_x) < 3.0 * s.stats[1].sem);
}

}
