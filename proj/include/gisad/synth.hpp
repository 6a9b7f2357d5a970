#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gisad/events.hpp"

namespace gisad {

/// Smooth Gaussian background in (x, m) plus a compact Gaussian signal blob.
/// Background: m ~ U[m_lo, m_hi], x | m ~ N(x_intercept + x_slope * m, x_width).
/// Signal: (x, m) ~ N((signal_x, signal_m), diag(signal_x_width, signal_m_width)).
struct ToyConfig {
  std::size_t n_background = 50000;
  std::size_t n_signal = 500;
  double m_lo = 0.0;
  double m_hi = 10.0;
  double x_intercept = 0.0;
  double x_slope = 0.3;
  double x_width = 1.0;
  double signal_x = 3.3;
  double signal_m = 6.0;
  double signal_x_width = 0.1;
  double signal_m_width = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
  double background_mean(double m) const { return x_intercept + x_slope * m; }
  /// Analytic background p(x | m).
  double background_conditional_density(double x, double m) const;
  /// Analytic background p(x, m); integrates to one over the plane.
  double background_joint_density(double x, double m) const;
};

struct Resonance {
  double mass = 3823.0;
  double m1 = 732.0;
  double m2 = 378.0;
  double width_mjj = 100.0;
  double width_mj1 = 40.0;
  double width_dm = 40.0;
};

/// Dijet-like benchmark with features (m_j1, dm, tau21_1, tau21_2) and
/// conditional m_jj. Background m_jj falls exponentially over [m_lo, m_hi].
struct LhcConfig {
  std::size_t n_background = 99920;
  std::size_t n_signal = 80;
  Resonance resonance;
  double m_lo = 2250.0;
  double m_hi = 4750.0;
  double spectrum_scale = 600.0;  // GeV, e-folding length of the m_jj spectrum
  std::uint64_t seed = 1;

  void validate() const;
};

/// Events plus truth labels. Labels are for evaluation only.
struct LabeledDataset {
  EventTable events;
  std::vector<std::uint8_t> is_signal;

  std::size_t n_signal() const;
};

LabeledDataset generate_toy(const ToyConfig& cfg);
LabeledDataset generate_lhc_like(const LhcConfig& cfg);

}  // namespace gisad
