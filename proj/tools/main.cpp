#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gisad/anomaly.hpp"
#include "gisad/errors.hpp"
#include "gisad/gis_flow.hpp"
#include "gisad/io.hpp"
#include "gisad/jets.hpp"
#include "gisad/parallel.hpp"
#include "gisad/synth.hpp"
#include "run_support.hpp"

namespace fs = std::filesystem;
using namespace gisad;
using gisad::cli::Json;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;

// Options given in a --config file fill any option that was not set on the
// command line.
void apply_config_file(CLI::App& app, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : cli::read_key_value_file(path)) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = app.get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config") {
      throw ConfigError(path + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ConfigError(path + ": bad value for '" + key + "': " + e.what());
    }
  }
}

void write_manifest(cli::OutputSet& outputs, const fs::path& path, Json manifest) {
  manifest["outputs"] = outputs.checksums();
  std::ofstream& os = outputs.open(path);
  os << manifest.dump(2) << '\n';
}

fs::path with_suffix(const std::string& prefix, const char* suffix) { return prefix + suffix; }

// features ------------------------------------------------------------------

struct FeaturesArgs {
  std::string input;
  std::string output;
  std::string manifest;
  double radius = 1.0;
  double eta_max = 2.5;
  double window_lo = 2250.0;
  double window_hi = 4750.0;
};

int run_features(const FeaturesArgs& a) {
  if (!(a.window_lo < a.window_hi)) throw ConfigError("features: window bounds must be ordered");
  if (!(a.radius > 0.0)) throw ConfigError("features: radius must be positive");
  if (!(a.eta_max > 0.0)) throw ConfigError("features: eta-max must be positive");

  cli::OutputSet outputs;
  std::ifstream in = cli::open_input(a.input);
  std::ofstream& out = outputs.open(a.output);
  out << "event_id,m_jj,m_j1,dm,tau21_1,tau21_2\n";

  std::map<std::string, std::size_t> rejected;
  std::size_t events_in = 0;
  std::size_t events_out = 0;
  const std::size_t rows = read_particles_csv(in, [&](std::int64_t id, std::span<const Particle> ps) {
    ++events_in;
    FeatureResult r = extract_features(ps, a.radius, a.eta_max);
    if (r.features && (r.features->m_jj <= a.window_lo || r.features->m_jj >= a.window_hi)) {
      r = {std::nullopt, Rejection::kOutsideWindow};
    }
    if (!r.features) {
      ++rejected[std::string(rejection_name(r.rejection))];
      return;
    }
    const EventFeatures& f = *r.features;
    out << id << ',' << format_double(f.m_jj) << ',' << format_double(f.m_j1) << ','
        << format_double(f.m_j1_minus_m_j2) << ',' << format_double(f.tau21_j1) << ','
        << format_double(f.tau21_j2) << '\n';
    ++events_out;
  });

  Json m = cli::manifest_header("features");
  m["inputs"] = Json::array({cli::input_record(a.input)});
  m["config"] = {{"radius", a.radius},
                 {"eta_max", a.eta_max},
                 {"window_lo", a.window_lo},
                 {"window_hi", a.window_hi}};
  m["counts"] = {{"particle_rows", rows}, {"events_in", events_in}, {"events_out", events_out}};
  Json rej = Json::object();
  for (Rejection r : {Rejection::kFewerThanTwoJets, Rejection::kTooFewConstituents,
                      Rejection::kOutsideWindow}) {
    const std::string name(rejection_name(r));
    rej[name] = rejected.count(name) ? rejected[name] : 0;
  }
  m["counts"]["rejected"] = rej;
  write_manifest(outputs, a.manifest.empty() ? fs::path(a.output + ".manifest.json") : fs::path(a.manifest), m);
  outputs.commit();

  std::printf("events in %zu, written %zu\n", events_in, events_out);
  for (const auto& [name, count] : rej.items()) {
    std::printf("  rejected %s: %zu\n", name.c_str(), count.get<std::size_t>());
  }
  return 0;
}

// fit -----------------------------------------------------------------------

struct FitArgs {
  std::string input;
  std::string model;
  std::string manifest;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> slices;
  std::optional<std::size_t> candidates;
  std::optional<std::size_t> knots;
  std::optional<double> floor;
  std::optional<double> smoothing;
  std::optional<std::size_t> bins;
  std::optional<std::size_t> max_score_samples;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool quiet = false;
};

Json fit_config_json(const FitConfig& c) {
  return {{"n_iterations", c.n_iterations},
          {"slices_per_iteration", c.slices_per_iteration},
          {"n_direction_candidates", c.n_direction_candidates},
          {"knots_per_transform", c.knots_per_transform},
          {"derivative_floor", c.derivative_floor},
          {"quantile_smoothing", c.quantile_smoothing},
          {"rng_seed", c.rng_seed},
          {"n_conditional_bins", c.n_conditional_bins},
          {"max_score_samples", c.max_score_samples}};
}

int run_fit(const FitArgs& a) {
  std::ifstream in = cli::open_input(a.input);
  const EventTable events = read_features_csv(in);
  if (events.size() == 0) throw InputError("fit: " + a.input + " has no events");

  FitConfig cfg = default_fit_config(events.dim());
  if (a.iterations) cfg.n_iterations = *a.iterations;
  if (a.slices) cfg.slices_per_iteration = *a.slices;
  if (a.candidates) cfg.n_direction_candidates = *a.candidates;
  if (a.knots) cfg.knots_per_transform = *a.knots;
  if (a.floor) cfg.derivative_floor = *a.floor;
  if (a.smoothing) cfg.quantile_smoothing = *a.smoothing;
  if (a.bins) cfg.n_conditional_bins = *a.bins;
  if (a.max_score_samples) cfg.max_score_samples = *a.max_score_samples;
  cfg.rng_seed = a.seed;
  cfg.threads = a.threads;
  cfg.validate(events.dim());

  std::vector<IterationStats> history;
  const FlowModel model = fit_gis(events.x, events.m, cfg, [&](const IterationStats& s) {
    history.push_back(s);
    if (!a.quiet) {
      std::printf("iteration %4zu  W1 %.6f -> %.6f\n", s.iteration, s.w1_before, s.w1_after);
      std::fflush(stdout);
    }
  });

  cli::OutputSet outputs;
  save_model(model, outputs.open(a.model));

  Json m = cli::manifest_header("fit");
  m["inputs"] = Json::array({cli::input_record(a.input)});
  m["config"] = fit_config_json(cfg);
  m["counts"] = {{"events", events.size()}, {"features", events.dim()}};
  m["conditional"] = events.conditional_name;
  m["feature_names"] = events.feature_names;
  if (!history.empty()) {
    m["w1_first_iteration"] = {history.front().w1_before, history.front().w1_after};
    m["w1_last_iteration"] = {history.back().w1_before, history.back().w1_after};
  }
  write_manifest(outputs, a.manifest.empty() ? fs::path(a.model + ".manifest.json") : fs::path(a.manifest), m);
  outputs.commit();
  std::printf("fitted %zu layers on %zu events x %zu features\n", model.layers().size(),
              events.size(), events.dim());
  return 0;
}

// score ---------------------------------------------------------------------

struct ScoreArgs {
  std::string input;
  std::string model;
  std::string out;
  std::string labels;
  double sigma = 250.0;
  std::size_t n_quad = 10;
  std::optional<double> exclusion;
  std::vector<double> thresholds{1.5, 2.5, 5.0};
  double signal_sigma = 0.0;
  std::optional<double> scan_width;
  std::optional<std::string> unit;
  unsigned threads = 0;
};

void print_label_metrics(const AnomalyReport& report, std::span<const std::uint8_t> labels) {
  std::vector<double> bg;
  std::vector<double> sig;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] ? sig : bg).push_back(report.alphas[i]);
  }
  std::printf("truth: %zu background, %zu signal\n", bg.size(), sig.size());
  if (!bg.empty()) {
    std::printf("  background alpha median %.4f p95 %.4f p99 %.4f\n", quantile(bg, 0.5),
                quantile(bg, 0.95), quantile(bg, 0.99));
  }
  if (!sig.empty()) {
    double mean = 0.0;
    for (double v : sig) mean += v;
    std::printf("  signal alpha mean %.4f median %.4f\n", mean / static_cast<double>(sig.size()),
                quantile(sig, 0.5));
  }
  for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
    std::size_t hits = 0;
    for (std::size_t i : report.selections[t]) hits += labels[i];
    std::printf("  alpha > %g: %zu selected, %zu signal\n", report.thresholds[t],
                report.selections[t].size(), hits);
  }
}

int run_score(const ScoreArgs& a) {
  ScoreConfig cfg;
  cfg.sigma = a.sigma;
  cfg.n_quad = a.n_quad;
  cfg.exclusion_halfwidth = a.exclusion;
  cfg.cut_thresholds = a.thresholds;
  cfg.signal_sigma = a.signal_sigma;
  cfg.threads = a.threads;
  cfg.validate();
  if (a.scan_width && !(*a.scan_width > 0.0)) throw ConfigError("score: scan-width must be positive");

  std::ifstream model_in = cli::open_input(a.model);
  const FlowModel model = load_model(model_in);
  std::ifstream in = cli::open_input(a.input);
  const EventTable events = read_features_csv(in);
  std::vector<std::uint8_t> labels;
  if (!a.labels.empty()) {
    std::ifstream lin = cli::open_input(a.labels);
    labels = read_labels_csv(lin, events.ids);
  }

  const AnomalyReport report = score_events(model, events, cfg);
  const bool gev = events.conditional_name == "m_jj";
  const std::string unit = a.unit.value_or(gev ? "GeV" : "");
  double width = 100.0;
  if (a.scan_width) {
    width = *a.scan_width;
  } else if (!gev && events.size() > 0) {
    const auto [mn, mx] = std::minmax_element(events.m.begin(), events.m.end());
    width = *mx > *mn ? (*mx - *mn) / 25.0 : 1.0;
  }
  const std::vector<ScanBin> scan = scan_profile(report, events, width);
  const auto peak = scan_argmax(scan);

  std::string summary;
  for (const SelectionSummary& s : report.summaries) summary += format_summary(s, unit);
  if (peak) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "scan peak: %s in [%s, %s) with alpha_max %s\n",
                  events.conditional_name.c_str(), format_double(scan[*peak].m_lo).c_str(),
                  format_double(scan[*peak].m_hi).c_str(),
                  format_double(*scan[*peak].alpha_max).c_str());
    summary += buf;
  }

  cli::OutputSet outputs;
  write_scores_csv(outputs.open(with_suffix(a.out, ".scores.csv")), events, report);
  write_scan_csv(outputs.open(with_suffix(a.out, ".scan.csv")), scan);
  outputs.open(with_suffix(a.out, ".summary.txt")) << summary;

  std::size_t clamped = 0;
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    clamped += report.clamped[i];
    degenerate += report.degenerate[i];
  }
  Json m = cli::manifest_header("score");
  Json inputs = Json::array({cli::input_record(a.input), cli::input_record(a.model)});
  if (!a.labels.empty()) inputs.push_back(cli::input_record(a.labels));
  m["inputs"] = inputs;
  m["config"] = {{"sigma", cfg.sigma},
                 {"n_quad", cfg.n_quad},
                 {"exclusion_halfwidth", cfg.resolved_exclusion()},
                 {"cut_thresholds", report.thresholds},
                 {"signal_sigma", cfg.signal_sigma},
                 {"scan_width", width},
                 {"unit", unit}};
  Json selected = Json::array();
  for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
    selected.push_back({{"threshold", report.thresholds[t]}, {"count", report.selections[t].size()}});
  }
  m["counts"] = {{"events", events.size()},
                 {"clamped", clamped},
                 {"degenerate", degenerate},
                 {"selected", selected}};
  write_manifest(outputs, with_suffix(a.out, ".manifest.json"), m);
  outputs.commit();

  std::fputs(summary.c_str(), stdout);
  if (!labels.empty()) print_label_metrics(report, labels);
  return 0;
}

// synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string kind;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_background;
  std::optional<std::size_t> n_signal;
  ToyConfig toy;
  LhcConfig lhc;
};

int run_synth(SynthArgs a) {
  LabeledDataset ds;
  Json config;
  if (a.kind == "toy") {
    ToyConfig& c = a.toy;
    if (a.seed) c.seed = *a.seed;
    if (a.n_background) c.n_background = *a.n_background;
    if (a.n_signal) c.n_signal = *a.n_signal;
    ds = generate_toy(c);
    config = {{"kind", "toy"},           {"seed", c.seed},
              {"n_background", c.n_background}, {"n_signal", c.n_signal},
              {"m_lo", c.m_lo},           {"m_hi", c.m_hi},
              {"x_intercept", c.x_intercept}, {"x_slope", c.x_slope},
              {"x_width", c.x_width},     {"signal_x", c.signal_x},
              {"signal_m", c.signal_m},   {"signal_x_width", c.signal_x_width},
              {"signal_m_width", c.signal_m_width}};
  } else {
    LhcConfig& c = a.lhc;
    if (a.seed) c.seed = *a.seed;
    if (a.n_background) c.n_background = *a.n_background;
    if (a.n_signal) c.n_signal = *a.n_signal;
    ds = generate_lhc_like(c);
    const Resonance& r = c.resonance;
    config = {{"kind", "lhc"},
              {"seed", c.seed},
              {"n_background", c.n_background},
              {"n_signal", c.n_signal},
              {"m_lo", c.m_lo},
              {"m_hi", c.m_hi},
              {"spectrum_scale", c.spectrum_scale},
              {"mass", r.mass},
              {"m1", r.m1},
              {"m2", r.m2},
              {"width_mjj", r.width_mjj},
              {"width_mj1", r.width_mj1},
              {"width_dm", r.width_dm}};
  }

  cli::OutputSet outputs;
  write_features_csv(outputs.open(with_suffix(a.out, ".features.csv")), ds.events);
  write_labels_csv(outputs.open(with_suffix(a.out, ".labels.csv")), ds.events.ids, ds.is_signal);
  Json m = cli::manifest_header("synth");
  m["inputs"] = Json::array();
  m["config"] = config;
  m["counts"] = {{"events", ds.events.size()}, {"signal", ds.n_signal()}};
  write_manifest(outputs, with_suffix(a.out, ".manifest.json"), m);
  outputs.commit();
  std::printf("wrote %zu events (%zu signal) to %s.features.csv\n", ds.events.size(),
              ds.n_signal(), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional Gaussianizing flow and local over-density anomaly scores"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));

  std::map<CLI::App*, std::string> config_paths;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_paths[sub], "key = value file; flags override it");
  };

  FeaturesArgs fa;
  CLI::App* features = app.add_subcommand("features", "Cluster particles into jets and write event features");
  features->add_option("-i,--input", fa.input, "particle CSV: event_id,pt,eta,phi[,mass]")->required();
  features->add_option("-o,--output", fa.output, "features CSV to write")->required();
  features->add_option("--manifest", fa.manifest, "manifest path (default <output>.manifest.json)");
  features->add_option("-R,--radius", fa.radius, "anti-kt radius")->capture_default_str();
  features->add_option("--eta-max", fa.eta_max, "keep jets with |eta| below this")->capture_default_str();
  features->add_option("--window-lo", fa.window_lo, "lower m_jj bound (GeV)")->capture_default_str();
  features->add_option("--window-hi", fa.window_hi, "upper m_jj bound (GeV)")->capture_default_str();
  add_config(features);

  FitArgs fi;
  CLI::App* fit = app.add_subcommand("fit", "Fit the conditional flow to a features CSV");
  fit->add_option("-i,--input", fi.input, "features CSV; the second column is the conditional")->required();
  fit->add_option("-m,--model", fi.model, "model file to write")->required();
  fit->add_option("--manifest", fi.manifest, "manifest path (default <model>.manifest.json)");
  fit->add_option("--iterations", fi.iterations, "flow layers (default 20 per feature)");
  fit->add_option("--slices", fi.slices, "directions per layer (default min(d, 4))");
  fit->add_option("--candidates", fi.candidates, "random direction sets tried per layer (default 64)");
  fit->add_option("--knots", fi.knots, "knots per marginal transform (default 64)");
  fit->add_option("--floor", fi.floor, "derivative floor (default 1e-6)");
  fit->add_option("--smoothing", fi.smoothing, "knot quantile bandwidth in knot spacings (default 4)");
  fit->add_option("--bins", fi.bins, "conditional bins (default 8)");
  fit->add_option("--max-score-samples", fi.max_score_samples, "rows used to rank directions (default 8192, 0 = all)");
  fit->add_option("--seed", fi.seed, "random seed")->capture_default_str();
  fit->add_option("--threads", fi.threads, "worker threads, 0 = all cores; results do not depend on it")->capture_default_str();
  fit->add_flag("-q,--quiet", fi.quiet, "do not print per-iteration progress");
  add_config(fit);

  ScoreArgs sa;
  CLI::App* score = app.add_subcommand("score", "Score events with a fitted model and summarize cuts");
  score->add_option("-i,--input", sa.input, "features CSV")->required();
  score->add_option("-m,--model", sa.model, "model file from fit")->required();
  score->add_option("-o,--out", sa.out, "output prefix for .scores.csv, .scan.csv, .summary.txt, .manifest.json")->required();
  score->add_option("--labels", sa.labels, "optional labels CSV, used only to print truth metrics");
  score->add_option("--sigma", sa.sigma, "background kernel width, units of the conditional")->capture_default_str();
  score->add_option("--n-quad", sa.n_quad, "kernel evaluation points")->capture_default_str();
  score->add_option("--exclusion", sa.exclusion, "kernel half-width left out around m (default sigma / 2)");
  score->add_option("--thresholds", sa.thresholds, "alpha cuts")->delimiter(',')->capture_default_str();
  score->add_option("--signal-sigma", sa.signal_sigma, "if > 0, also smooth p_signal with this width")->capture_default_str();
  score->add_option("--scan-width", sa.scan_width, "scan bin width (default 100 for m_jj, else range / 25)");
  score->add_option("--unit", sa.unit, "unit printed in summaries (default GeV for m_jj)");
  score->add_option("--threads", sa.threads, "worker threads, 0 = all cores; results do not depend on it")->capture_default_str();
  add_config(score);

  SynthArgs sy;
  CLI::App* synth = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
  synth->add_option("kind", sy.kind, "toy or lhc")->required()->check(CLI::IsMember({"toy", "lhc"}));
  synth->add_option("-o,--out", sy.out, "output prefix for .features.csv, .labels.csv, .manifest.json")->required();
  synth->add_option("--seed", sy.seed, "random seed (toy 7, lhc 1)");
  synth->add_option("--n-background", sy.n_background, "background events (toy 50000, lhc 99920)");
  synth->add_option("--n-signal", sy.n_signal, "signal events (toy 500, lhc 80)");
  synth->add_option("--m-lo", sy.toy.m_lo, "toy: lower m")->capture_default_str();
  synth->add_option("--m-hi", sy.toy.m_hi, "toy: upper m")->capture_default_str();
  synth->add_option("--x-intercept", sy.toy.x_intercept, "toy: background mean at m = 0")->capture_default_str();
  synth->add_option("--x-slope", sy.toy.x_slope, "toy: background mean slope in m")->capture_default_str();
  synth->add_option("--x-width", sy.toy.x_width, "toy: background width")->capture_default_str();
  synth->add_option("--signal-x", sy.toy.signal_x, "toy: signal x")->capture_default_str();
  synth->add_option("--signal-m", sy.toy.signal_m, "toy: signal m")->capture_default_str();
  synth->add_option("--signal-x-width", sy.toy.signal_x_width, "toy: signal x width")->capture_default_str();
  synth->add_option("--signal-m-width", sy.toy.signal_m_width, "toy: signal m width")->capture_default_str();
  synth->add_option("--mass", sy.lhc.resonance.mass, "lhc: resonance mass (GeV)")->capture_default_str();
  synth->add_option("--m1", sy.lhc.resonance.m1, "lhc: first daughter mass (GeV)")->capture_default_str();
  synth->add_option("--m2", sy.lhc.resonance.m2, "lhc: second daughter mass (GeV)")->capture_default_str();
  synth->add_option("--width-mjj", sy.lhc.resonance.width_mjj, "lhc: m_jj width (GeV)")->capture_default_str();
  synth->add_option("--width-mj1", sy.lhc.resonance.width_mj1, "lhc: m_j1 width (GeV)")->capture_default_str();
  synth->add_option("--width-dm", sy.lhc.resonance.width_dm, "lhc: dm width (GeV)")->capture_default_str();
  synth->add_option("--spectrum-scale", sy.lhc.spectrum_scale, "lhc: m_jj e-folding length (GeV)")->capture_default_str();
  add_config(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    apply_config_file(*sub, config_paths[sub]);
    if (sub == features) return run_features(fa);
    if (sub == fit) return run_fit(fi);
    if (sub == score) return run_score(sa);
    return run_synth(sy);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const FitError& e) {
    std::fprintf(stderr, "fit error: %s\n", e.what());
    return kExitInput;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
}
