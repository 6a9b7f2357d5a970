#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gisad/events.hpp"
#include "gisad/gis_flow.hpp"

namespace gisad {

struct ScoreConfig {
  /// Width of the Gaussian kernel along m, in the units of m.
  double sigma = 250.0;
  /// Kernel evaluation points, equally spaced over [-2 sigma, 2 sigma].
  std::size_t n_quad = 10;
  /// Kernel points with |offset| below this are dropped. Defaults to sigma / 2.
  std::optional<double> exclusion_halfwidth;
  std::vector<double> cut_thresholds{1.5, 2.5, 5.0};
  /// When > 0, p_signal is also averaged over a Gaussian kernel of this
  /// width (no exclusion). 0 keeps the point estimate.
  double signal_sigma = 0.0;
  /// Worker threads for scoring (0 = all cores). Does not affect results.
  unsigned threads = 1;

  void validate() const;
  double resolved_exclusion() const { return exclusion_halfwidth.value_or(0.5 * sigma); }
};

/// Offsets along m and their normalized Gaussian weights.
struct Quadrature {
  std::vector<double> offsets;
  std::vector<double> weights;
};

/// Kernel for p_background. Throws ConfigError if every point is excluded.
Quadrature background_quadrature(const ScoreConfig& cfg);
/// Kernel of width sigma over n_quad points with no exclusion.
Quadrature smoothing_quadrature(double sigma, std::size_t n_quad);

struct DensityEstimate {
  double density;
  bool clamped;  // some evaluation point fell outside the trained m range
};

/// p(x | m) as given by the flow.
double signal_density(const FlowModel& model, std::span<const double> x, double m);

/// Kernel-weighted average of p(x | m + offset) over the background quadrature.
DensityEstimate background_density(const FlowModel& model, std::span<const double> x, double m,
                                   const ScoreConfig& cfg);
DensityEstimate background_density(const FlowModel& model, std::span<const double> x, double m,
                                   const Quadrature& quad);

struct FeatureStat {
  std::string name;
  double mean;
  double std;  // sample standard deviation; 0 for a single event
  double sem;
};

struct SelectionSummary {
  double threshold = 0.0;
  std::size_t count = 0;
  bool single_event = false;  // std and sem are undefined and reported as 0
  std::vector<FeatureStat> stats;  // conditional first, then features

  bool empty() const { return count == 0; }
};

struct AnomalyReport {
  std::vector<double> alphas;
  std::vector<double> p_signal;
  std::vector<double> p_background;
  std::vector<std::uint8_t> clamped;
  /// p_background underflowed to zero; alpha is +infinity.
  std::vector<std::uint8_t> degenerate;
  /// Ascending thresholds with matching selections (indices with alpha > t)
  /// and summaries.
  std::vector<double> thresholds;
  std::vector<std::vector<std::size_t>> selections;
  std::vector<SelectionSummary> summaries;
};

AnomalyReport score_events(const FlowModel& model, const EventTable& events,
                           const ScoreConfig& cfg);

/// Mean, sample standard deviation and standard error of the conditional and
/// every feature over the selected events. An empty selection yields an
/// empty summary.
SelectionSummary summarize(const EventTable& events, std::span<const std::size_t> selection);

/// Indices with alpha > threshold, in event order.
std::vector<std::size_t> select_above(std::span<const double> alphas, double threshold);

/// Indices of events whose m lies in [lo, hi], taken from `selection`.
std::vector<std::size_t> restrict_to_window(const EventTable& events,
                                            std::span<const std::size_t> selection, double lo,
                                            double hi);

/// Human-readable block such as "m_jj = 3772.9 +/- 8.3 GeV".
std::string format_summary(const SelectionSummary& summary, const std::string& unit);

struct ScanBin {
  double m_lo;
  double m_hi;
  std::size_t count;
  std::optional<double> alpha_max;
  std::optional<double> alpha_p99;
};

/// Alpha profile along m in bins of bin_width starting at a multiple of
/// bin_width at or below the smallest m.
std::vector<ScanBin> scan_profile(const AnomalyReport& report, const EventTable& events,
                                  double bin_width);

/// Index of the scan bin with the largest alpha_max (lowest index on ties).
std::optional<std::size_t> scan_argmax(const std::vector<ScanBin>& scan);

/// Linear-interpolation quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace gisad
