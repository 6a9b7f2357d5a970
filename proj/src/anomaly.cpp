#include "gisad/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "gisad/errors.hpp"
#include "gisad/parallel.hpp"

namespace gisad {

namespace {

Quadrature kernel_points(double sigma, std::size_t n_quad, double exclusion) {
  Quadrature q;
  const double step = 4.0 * sigma / static_cast<double>(n_quad - 1);
  for (std::size_t j = 0; j < n_quad; ++j) {
    const double offset = -2.0 * sigma + step * static_cast<double>(j);
    if (std::abs(offset) < exclusion) continue;
    q.offsets.push_back(offset);
    q.weights.push_back(std::exp(-0.5 * (offset / sigma) * (offset / sigma)));
  }
  double total = 0.0;
  for (double w : q.weights) total += w;
  for (double& w : q.weights) w /= total;
  return q;
}

// log of sum_j w_j exp(log_p_j), without underflow in the intermediate terms.
double log_weighted_sum(std::span<const double> log_p, std::span<const double> weights) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : log_p) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (std::size_t j = 0; j < log_p.size(); ++j) acc += weights[j] * std::exp(log_p[j] - peak);
  return peak + std::log(acc);
}

DensityEstimate kernel_density(const FlowModel& model, std::span<const double> x, double m,
                               const Quadrature& quad) {
  std::vector<double> log_p(quad.offsets.size());
  bool clamped = false;
  for (std::size_t j = 0; j < quad.offsets.size(); ++j) {
    const double mj = m + quad.offsets[j];
    clamped = clamped || !model.binning().contains(mj);
    log_p[j] = model.log_density(x, mj);
  }
  return {std::exp(log_weighted_sum(log_p, quad.weights)), clamped};
}

}  // namespace

void ScoreConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("score config: sigma must be > 0");
  if (n_quad < 2) throw ConfigError("score config: n_quad must be >= 2");
  if (!(resolved_exclusion() >= 0.0)) {
    throw ConfigError("score config: exclusion half-width must be >= 0");
  }
  for (double t : cut_thresholds) {
    if (!(t > 0.0)) throw ConfigError("score config: cut thresholds must be positive");
  }
  if (!(signal_sigma >= 0.0)) throw ConfigError("score config: signal_sigma must be >= 0");
}

Quadrature background_quadrature(const ScoreConfig& cfg) {
  cfg.validate();
  Quadrature q = kernel_points(cfg.sigma, cfg.n_quad, cfg.resolved_exclusion());
  if (q.offsets.empty()) {
    throw ConfigError("score config: exclusion half-width removes every quadrature point");
  }
  return q;
}

Quadrature smoothing_quadrature(double sigma, std::size_t n_quad) {
  if (!(sigma > 0.0) || n_quad < 2) throw ConfigError("smoothing kernel: bad sigma or n_quad");
  return kernel_points(sigma, n_quad, 0.0);
}

double signal_density(const FlowModel& model, std::span<const double> x, double m) {
  return std::exp(model.log_density(x, m));
}

DensityEstimate background_density(const FlowModel& model, std::span<const double> x, double m,
                                   const Quadrature& quad) {
  return kernel_density(model, x, m, quad);
}

DensityEstimate background_density(const FlowModel& model, std::span<const double> x, double m,
                                   const ScoreConfig& cfg) {
  return kernel_density(model, x, m, background_quadrature(cfg));
}

std::vector<std::size_t> select_above(std::span<const double> alphas, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i] > threshold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> restrict_to_window(const EventTable& events,
                                            std::span<const std::size_t> selection, double lo,
                                            double hi) {
  std::vector<std::size_t> out;
  for (std::size_t i : selection) {
    if (events.m[i] >= lo && events.m[i] <= hi) out.push_back(i);
  }
  return out;
}

AnomalyReport score_events(const FlowModel& model, const EventTable& events,
                           const ScoreConfig& cfg) {
  if (events.dim() != model.dim()) {
    throw ConfigError("score: model dimension " + std::to_string(model.dim()) +
                      " does not match event dimension " + std::to_string(events.dim()));
  }
  const Quadrature background = background_quadrature(cfg);
  std::optional<Quadrature> smoothing;
  if (cfg.signal_sigma > 0.0) smoothing = smoothing_quadrature(cfg.signal_sigma, cfg.n_quad);

  const std::size_t n = events.size();
  AnomalyReport report;
  report.alphas.resize(n);
  report.p_signal.resize(n);
  report.p_background.resize(n);
  report.clamped.resize(n);
  report.degenerate.resize(n);

  parallel_for(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const auto x = events.row(i);
        const double m = events.m[i];
        bool clamped = !model.binning().contains(m);
        double ps = 0.0;
        if (smoothing) {
          const DensityEstimate s = kernel_density(model, x, m, *smoothing);
          ps = s.density;
          clamped = clamped || s.clamped;
        } else {
          ps = signal_density(model, x, m);
        }
        const DensityEstimate pb = kernel_density(model, x, m, background);
        report.p_signal[i] = ps;
        report.p_background[i] = pb.density;
        report.clamped[i] = (clamped || pb.clamped) ? 1 : 0;
        if (pb.density > 0.0) {
          report.alphas[i] = ps / pb.density;
        } else {
          report.alphas[i] = std::numeric_limits<double>::infinity();
          report.degenerate[i] = 1;
        }
      } catch (const std::exception& e) {
        throw InputError("event " + std::to_string(events.ids[i]) + ": " + e.what());
      }
    }
  });

  report.thresholds = cfg.cut_thresholds;
  std::sort(report.thresholds.begin(), report.thresholds.end());
  report.thresholds.erase(std::unique(report.thresholds.begin(), report.thresholds.end()),
                          report.thresholds.end());
  for (double t : report.thresholds) {
    report.selections.push_back(select_above(report.alphas, t));
    SelectionSummary s = summarize(events, report.selections.back());
    s.threshold = t;
    report.summaries.push_back(std::move(s));
  }
  return report;
}

SelectionSummary summarize(const EventTable& events, std::span<const std::size_t> selection) {
  SelectionSummary s;
  s.count = selection.size();
  if (selection.empty()) return s;
  s.single_event = selection.size() == 1;
  const auto nsel = static_cast<double>(selection.size());

  auto stat = [&](const std::string& name, auto value_of) {
    double mean = 0.0;
    for (std::size_t i : selection) mean += value_of(i);
    mean /= nsel;
    double sd = 0.0;
    if (selection.size() > 1) {
      double ss = 0.0;
      for (std::size_t i : selection) {
        const double dv = value_of(i) - mean;
        ss += dv * dv;
      }
      sd = std::sqrt(ss / (nsel - 1.0));
    }
    s.stats.push_back({name, mean, sd, sd / std::sqrt(nsel)});
  };

  stat(events.conditional_name, [&](std::size_t i) { return events.m[i]; });
  for (std::size_t j = 0; j < events.dim(); ++j) {
    const std::string name =
        j < events.feature_names.size() ? events.feature_names[j] : "x" + std::to_string(j);
    stat(name, [&](std::size_t i) {
      return events.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    });
  }
  return s;
}

std::string format_summary(const SelectionSummary& summary, const std::string& unit) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "alpha > %g: ", summary.threshold);
  os << buf;
  if (summary.empty()) {
    os << "no events pass cut\n";
    return os.str();
  }
  os << summary.count << (summary.count == 1 ? " event" : " events");
  if (summary.single_event) os << " (single event, spread undefined)";
  os << '\n';
  for (const FeatureStat& f : summary.stats) {
    const bool dimensionless = f.name.rfind("tau", 0) == 0;
    const std::string suffix = (unit.empty() || dimensionless) ? "" : " " + unit;
    const int digits = (dimensionless || std::abs(f.mean) < 10.0) ? 3 : 1;
    std::snprintf(buf, sizeof buf, "  %s = %.*f ± %.*f%s (std %.*f)\n", f.name.c_str(), digits,
                  f.mean, digits, f.sem, suffix.c_str(), digits, f.std);
    os << buf;
  }
  return os.str();
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<ScanBin> scan_profile(const AnomalyReport& report, const EventTable& events,
                                  double bin_width) {
  if (!(bin_width > 0.0)) throw ConfigError("scan: bin width must be positive");
  if (report.alphas.size() != events.size()) {
    throw InputError("scan: report does not match the events");
  }
  if (events.size() == 0) return {};
  const auto [mn, mx] = std::minmax_element(events.m.begin(), events.m.end());
  const double origin = std::floor(*mn / bin_width) * bin_width;
  const auto n_bins = static_cast<std::size_t>(std::floor((*mx - origin) / bin_width)) + 1;

  std::vector<std::vector<double>> per_bin(n_bins);
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor((events.m[i] - origin) / bin_width));
    per_bin[std::min(b, n_bins - 1)].push_back(report.alphas[i]);
  }
  std::vector<ScanBin> scan(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    ScanBin& s = scan[b];
    s.m_lo = origin + bin_width * static_cast<double>(b);
    s.m_hi = origin + bin_width * static_cast<double>(b + 1);
    s.count = per_bin[b].size();
    if (s.count > 0) {
      s.alpha_max = *std::max_element(per_bin[b].begin(), per_bin[b].end());
      s.alpha_p99 = quantile(std::move(per_bin[b]), 0.99);
    }
  }
  return scan;
}

std::optional<std::size_t> scan_argmax(const std::vector<ScanBin>& scan) {
  std::optional<std::size_t> best;
  for (std::size_t b = 0; b < scan.size(); ++b) {
    if (!scan[b].alpha_max) continue;
    if (!best || *scan[b].alpha_max > *scan[*best].alpha_max) best = b;
  }
  return best;
}

}  // namespace gisad
