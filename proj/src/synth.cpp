#include "gisad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "gisad/errors.hpp"

namespace gisad {

namespace {

double gauss_pdf(double x, double mean, double width) {
  const double u = (x - mean) / width;
  return std::exp(-0.5 * u * u) / (width * std::sqrt(2.0 * std::numbers::pi));
}

// Truncated to (lo, hi) by rejection.
double truncated_normal(std::mt19937_64& rng, double mean, double width, double lo, double hi) {
  std::normal_distribution<double> gauss(mean, width);
  for (;;) {
    const double v = gauss(rng);
    if (v > lo && v < hi) return v;
  }
}

double beta_draw(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

struct Draw {
  double m;
  std::vector<double> x;
  bool signal;
};

LabeledDataset assemble(std::vector<Draw> draws, std::mt19937_64& rng, std::string conditional,
                        std::vector<std::string> names) {
  std::shuffle(draws.begin(), draws.end(), rng);
  LabeledDataset out;
  EventTable& ev = out.events;
  const std::size_t n = draws.size();
  const auto d = static_cast<Eigen::Index>(names.size());
  ev.conditional_name = std::move(conditional);
  ev.feature_names = std::move(names);
  ev.ids.resize(n);
  ev.m.resize(n);
  ev.x.resize(static_cast<Eigen::Index>(n), d);
  out.is_signal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ev.ids[i] = static_cast<std::int64_t>(i);
    ev.m[i] = draws[i].m;
    for (Eigen::Index j = 0; j < d; ++j) {
      ev.x(static_cast<Eigen::Index>(i), j) = draws[i].x[static_cast<std::size_t>(j)];
    }
    out.is_signal[i] = draws[i].signal ? 1 : 0;
  }
  return out;
}

}  // namespace

void ToyConfig::validate() const {
  if (!(m_hi > m_lo)) throw ConfigError("toy config: m range must be increasing");
  if (!(x_width > 0.0) || !(signal_x_width > 0.0) || !(signal_m_width > 0.0)) {
    throw ConfigError("toy config: widths must be positive");
  }
}

double ToyConfig::background_conditional_density(double x, double m) const {
  return gauss_pdf(x, background_mean(m), x_width);
}

double ToyConfig::background_joint_density(double x, double m) const {
  if (m < m_lo || m > m_hi) return 0.0;
  return background_conditional_density(x, m) / (m_hi - m_lo);
}

void LhcConfig::validate() const {
  if (!(m_hi > m_lo)) throw ConfigError("lhc config: m_jj range must be increasing");
  if (!(spectrum_scale > 0.0)) throw ConfigError("lhc config: spectrum scale must be positive");
  const Resonance& r = resonance;
  if (!(r.width_mjj > 0.0) || !(r.width_mj1 > 0.0) || !(r.width_dm > 0.0)) {
    throw ConfigError("lhc config: resonance widths must be positive");
  }
}

std::size_t LabeledDataset::n_signal() const {
  return static_cast<std::size_t>(std::count(is_signal.begin(), is_signal.end(), 1));
}

LabeledDataset generate_toy(const ToyConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform_m(cfg.m_lo, cfg.m_hi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Draw> draws;
  draws.reserve(cfg.n_background + cfg.n_signal);
  for (std::size_t i = 0; i < cfg.n_background; ++i) {
    const double m = uniform_m(rng);
    const double x = cfg.background_mean(m) + cfg.x_width * gauss(rng);
    draws.push_back({m, {x}, false});
  }
  for (std::size_t i = 0; i < cfg.n_signal; ++i) {
    const double m = cfg.signal_m + cfg.signal_m_width * gauss(rng);
    const double x = cfg.signal_x + cfg.signal_x_width * gauss(rng);
    draws.push_back({m, {x}, true});
  }
  return assemble(std::move(draws), rng, "m", {"x"});
}

LabeledDataset generate_lhc_like(const LhcConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double span = cfg.m_hi - cfg.m_lo;
  const double tail = -std::expm1(-span / cfg.spectrum_scale);
  std::vector<Draw> draws;
  draws.reserve(cfg.n_background + cfg.n_signal);
  for (std::size_t i = 0; i < cfg.n_background; ++i) {
    // Inverse CDF of the exponential truncated to [m_lo, m_hi].
    const double mjj = cfg.m_lo - cfg.spectrum_scale * std::log1p(-uniform(rng) * tail);
    // Jet masses grow slowly with the dijet mass.
    const double growth = std::pow(mjj / cfg.m_lo, 0.8);
    const double mj1 = 100.0 * growth * std::exp(0.6 * gauss(rng));
    const double mj2 = 70.0 * growth * std::exp(0.6 * gauss(rng));
    const double tau1 = beta_draw(rng, 5.0, 2.5);
    const double tau2 = beta_draw(rng, 5.0, 2.5);
    draws.push_back({mjj, {mj1, mj1 - mj2, tau1, tau2}, false});
  }
  const Resonance& r = cfg.resonance;
  for (std::size_t i = 0; i < cfg.n_signal; ++i) {
    const double mjj = truncated_normal(rng, r.mass, r.width_mjj, cfg.m_lo, cfg.m_hi);
    const double mj1 = r.m1 + r.width_mj1 * gauss(rng);
    const double dm = (r.m1 - r.m2) + r.width_dm * gauss(rng);
    const double tau1 = truncated_normal(rng, 0.2, 0.05, 0.0, 1.0);
    const double tau2 = truncated_normal(rng, 0.2, 0.05, 0.0, 1.0);
    draws.push_back({mjj, {mj1, dm, tau1, tau2}, true});
  }
  return assemble(std::move(draws), rng, "m_jj", {"m_j1", "dm", "tau21_1", "tau21_2"});
}

}  // namespace gisad
