#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace gisad {

/// Detector-coordinate particle. phi is wrapped to [-pi, pi) on use.
struct Particle {
  double pt = 0.0;
  double eta = 0.0;
  double phi = 0.0;
  double mass = 0.0;
};

struct FourMomentum {
  double e = 0.0;
  double px = 0.0;
  double py = 0.0;
  double pz = 0.0;

  FourMomentum& operator+=(const FourMomentum& o) {
    e += o.e;
    px += o.px;
    py += o.py;
    pz += o.pz;
    return *this;
  }
  friend FourMomentum operator+(FourMomentum a, const FourMomentum& b) { return a += b; }

  double pt() const;
  /// Pseudorapidity; a vector along the beam gets +-kBeamEta, the null vector 0.
  double eta() const;
  double phi() const;
  /// sqrt(max(0, E^2 - |p|^2)).
  double mass() const;
};

inline constexpr double kBeamEta = 1e5;

double wrap_phi(double phi);
double delta_phi(double phi1, double phi2);
double delta_r2(double eta1, double phi1, double eta2, double phi2);
FourMomentum four_momentum(const Particle& p);

struct Jet {
  /// Constituents in input order, with their input indices.
  std::vector<Particle> constituents;
  std::vector<std::size_t> indices;
  FourMomentum p4;
  double pt = 0.0;
  double eta = 0.0;
  double phi = 0.0;
  double mass = 0.0;
};

/// Anti-kt clustering (E-scheme, eta-phi distance). A pair merges when its
/// distance is strictly below every beam distance. Jets come back by
/// descending pt; equal-pt jets keep the order in which they were completed.
std::vector<Jet> cluster_antikt(std::span<const Particle> particles, double R);

/// Jets with |eta| < eta_max, order preserved.
std::vector<Jet> filter_jets(std::span<const Jet> jets, double eta_max);

double invariant_mass_pair(const Jet& j1, const Jet& j2);

/// tau_n with exclusive-kt axes. The constituents are merged pairwise by the
/// kt measure until n remain; no beam distance. Empty when the jet has fewer
/// than n constituents.
std::optional<double> nsubjettiness(const Jet& jet, std::size_t n, double R = 1.0);
/// tau_2 / tau_1, with 0/0 taken as 0.
std::optional<double> tau21(const Jet& jet, double R = 1.0);

struct EventFeatures {
  double m_jj = 0.0;
  double m_j1 = 0.0;
  double m_j1_minus_m_j2 = 0.0;
  double tau21_j1 = 0.0;
  double tau21_j2 = 0.0;
};

enum class Rejection {
  kNone,
  kFewerThanTwoJets,
  kTooFewConstituents,  // a lead jet has one constituent, tau21 undefined
  kOutsideWindow,       // set by callers that apply an m_jj window
};

std::string_view rejection_name(Rejection r);

struct FeatureResult {
  std::optional<EventFeatures> features;
  Rejection rejection = Rejection::kNone;
};

/// Clusters, drops jets with |eta| >= eta_max, and builds features from the
/// two leading jets. m_j1 belongs to the higher-pt jet.
FeatureResult extract_features(std::span<const Particle> particles, double R, double eta_max);

}  // namespace gisad
