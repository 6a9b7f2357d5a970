#include "gisad/jets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gisad/errors.hpp"

namespace gisad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Working object for the clustering loops.
struct PseudoJet {
  FourMomentum p4;
  double pt;
  double eta;
  double phi;
  double inv_kt2;  // 1 / pt^2, infinite at pt = 0
  std::vector<std::size_t> members;
};

PseudoJet from_particle(const Particle& p, std::size_t index) {
  PseudoJet j;
  j.p4 = four_momentum(p);
  j.pt = p.pt;
  j.eta = p.eta;
  j.phi = wrap_phi(p.phi);
  j.inv_kt2 = p.pt > 0.0 ? 1.0 / (p.pt * p.pt) : kInf;
  j.members = {index};
  return j;
}

PseudoJet merge(const PseudoJet& a, const PseudoJet& b) {
  PseudoJet j;
  j.p4 = a.p4 + b.p4;
  j.pt = j.p4.pt();
  j.eta = j.p4.eta();
  j.phi = j.p4.phi();
  j.inv_kt2 = j.pt > 0.0 ? 1.0 / (j.pt * j.pt) : kInf;
  j.members = a.members;
  j.members.insert(j.members.end(), b.members.begin(), b.members.end());
  return j;
}

double geometric(const PseudoJet& a, const PseudoJet& b) {
  return delta_r2(a.eta, a.phi, b.eta, b.phi);
}

Jet to_jet(PseudoJet pj, std::span<const Particle> particles) {
  Jet jet;
  std::sort(pj.members.begin(), pj.members.end());
  jet.indices = pj.members;
  jet.constituents.reserve(pj.members.size());
  for (std::size_t i : pj.members) jet.constituents.push_back(particles[i]);
  jet.p4 = pj.p4;
  jet.pt = pj.pt;
  jet.eta = pj.eta;
  jet.phi = pj.phi;
  jet.mass = pj.p4.mass();
  return jet;
}

}  // namespace

double FourMomentum::pt() const { return std::hypot(px, py); }

double FourMomentum::eta() const {
  const double t = pt();
  if (t == 0.0) return pz == 0.0 ? 0.0 : std::copysign(kBeamEta, pz);
  return std::asinh(pz / t);
}

double FourMomentum::phi() const {
  if (px == 0.0 && py == 0.0) return 0.0;
  return wrap_phi(std::atan2(py, px));
}

double FourMomentum::mass() const {
  const double m2 = e * e - (px * px + py * py + pz * pz);
  return std::sqrt(std::max(0.0, m2));
}

double wrap_phi(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (phi >= -std::numbers::pi && phi < std::numbers::pi) return phi;
  double w = phi - two_pi * std::floor((phi + std::numbers::pi) / two_pi);
  if (w >= std::numbers::pi) w -= two_pi;
  return w;
}

double delta_phi(double phi1, double phi2) {
  double d = std::abs(wrap_phi(phi1) - wrap_phi(phi2));
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d;
}

double delta_r2(double eta1, double phi1, double eta2, double phi2) {
  const double de = eta1 - eta2;
  const double dp = delta_phi(phi1, phi2);
  return de * de + dp * dp;
}

FourMomentum four_momentum(const Particle& p) {
  const double phi = wrap_phi(p.phi);
  const double pz = p.pt * std::sinh(p.eta);
  const double p2 = p.pt * p.pt + pz * pz;
  return {std::sqrt(p2 + p.mass * p.mass), p.pt * std::cos(phi), p.pt * std::sin(phi), pz};
}

std::vector<Jet> cluster_antikt(std::span<const Particle> particles, double R) {
  if (!(R > 0.0)) throw ConfigError("cluster_antikt: R must be positive");
  const double inv_r2 = 1.0 / (R * R);

  std::vector<PseudoJet> live;
  live.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Particle& p = particles[i];
    if (!(p.pt >= 0.0) || !std::isfinite(p.pt) || !std::isfinite(p.eta) ||
        !std::isfinite(p.phi) || !(p.mass >= 0.0) || !std::isfinite(p.mass)) {
      throw InputError("cluster_antikt: particle " + std::to_string(i) + " is not physical");
    }
    live.push_back(from_particle(p, i));
  }

  // Geometric nearest neighbour of every live pseudojet. The smallest anti-kt
  // pair distance is always between some jet and its geometric neighbour.
  const std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> nn(live.size(), none);
  std::vector<double> nn_r2(live.size(), kInf);
  auto refresh = [&](std::size_t i) {
    nn[i] = none;
    nn_r2[i] = kInf;
    for (std::size_t j = 0; j < live.size(); ++j) {
      if (j == i) continue;
      const double r2 = geometric(live[i], live[j]);
      if (r2 < nn_r2[i]) {
        nn_r2[i] = r2;
        nn[i] = j;
      }
    }
  };
  auto pair_distance = [&](std::size_t i) {
    if (nn[i] == none) return kInf;
    const double a = std::min(live[i].inv_kt2, live[nn[i]].inv_kt2);
    return nn_r2[i] == 0.0 ? 0.0 : a * nn_r2[i] * inv_r2;
  };
  for (std::size_t i = 0; i < live.size(); ++i) refresh(i);

  std::vector<PseudoJet> finished;
  while (!live.empty()) {
    std::size_t beam = 0;
    std::size_t pair = 0;
    double d_beam = kInf;
    double d_pair = kInf;
    for (std::size_t i = 0; i < live.size(); ++i) {
      if (live[i].inv_kt2 < d_beam) {
        d_beam = live[i].inv_kt2;
        beam = i;
      }
      const double d = pair_distance(i);
      if (d < d_pair) {
        d_pair = d;
        pair = i;
      }
    }

    if (d_pair < d_beam) {
      std::size_t i = pair;
      std::size_t j = nn[pair];
      if (j < i) std::swap(i, j);
      live[i] = merge(live[i], live[j]);
      // Move the last pseudojet into slot j.
      const std::size_t last = live.size() - 1;
      if (j != last) {
        live[j] = std::move(live[last]);
        nn[j] = nn[last];
        nn_r2[j] = nn_r2[last];
        for (std::size_t k = 0; k + 1 < live.size(); ++k) {
          if (nn[k] == last) nn[k] = j;
        }
      }
      live.pop_back();
      nn.pop_back();
      nn_r2.pop_back();
      for (std::size_t k = 0; k < live.size(); ++k) {
        if (k == i) continue;
        if (nn[k] == i || nn[k] == j) {
          refresh(k);
        } else {
          const double r2 = geometric(live[k], live[i]);
          if (r2 < nn_r2[k]) {
            nn_r2[k] = r2;
            nn[k] = i;
          }
        }
      }
      refresh(i);
    } else {
      finished.push_back(std::move(live[beam]));
      const std::size_t last = live.size() - 1;
      if (beam != last) {
        live[beam] = std::move(live[last]);
        nn[beam] = nn[last];
        nn_r2[beam] = nn_r2[last];
        for (std::size_t k = 0; k + 1 < live.size(); ++k) {
          if (nn[k] == last) nn[k] = beam;
        }
      }
      live.pop_back();
      nn.pop_back();
      nn_r2.pop_back();
      for (std::size_t k = 0; k < live.size(); ++k) {
        if (nn[k] == beam || nn[k] >= live.size()) refresh(k);
      }
    }
  }

  std::vector<Jet> jets;
  jets.reserve(finished.size());
  for (auto& pj : finished) jets.push_back(to_jet(std::move(pj), particles));
  std::stable_sort(jets.begin(), jets.end(),
                   [](const Jet& a, const Jet& b) { return a.pt > b.pt; });
  return jets;
}

std::vector<Jet> filter_jets(std::span<const Jet> jets, double eta_max) {
  std::vector<Jet> out;
  for (const Jet& j : jets) {
    if (std::abs(j.eta) < eta_max) out.push_back(j);
  }
  return out;
}

double invariant_mass_pair(const Jet& j1, const Jet& j2) { return (j1.p4 + j2.p4).mass(); }

std::optional<double> nsubjettiness(const Jet& jet, std::size_t n, double R) {
  if (n == 0) throw ConfigError("nsubjettiness: n must be >= 1");
  if (!(R > 0.0)) throw ConfigError("nsubjettiness: R must be positive");
  const std::size_t nc = jet.constituents.size();
  if (nc < n) return std::nullopt;

  std::vector<PseudoJet> axes;
  axes.reserve(nc);
  for (std::size_t i = 0; i < nc; ++i) axes.push_back(from_particle(jet.constituents[i], i));
  while (axes.size() > n) {
    std::size_t bi = 0;
    std::size_t bj = 1;
    double best = kInf;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      for (std::size_t j = i + 1; j < axes.size(); ++j) {
        const double kt2 = std::min(axes[i].pt * axes[i].pt, axes[j].pt * axes[j].pt);
        const double d = kt2 * geometric(axes[i], axes[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    axes[bi] = merge(axes[bi], axes[bj]);
    axes.erase(axes.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  double num = 0.0;
  double sum_pt = 0.0;
  for (const Particle& p : jet.constituents) {
    const double phi = wrap_phi(p.phi);
    double nearest = kInf;
    for (const PseudoJet& a : axes) nearest = std::min(nearest, delta_r2(a.eta, a.phi, p.eta, phi));
    num += p.pt * std::sqrt(nearest);
    sum_pt += p.pt;
  }
  if (sum_pt == 0.0) return 0.0;
  return num / (R * sum_pt);
}

std::optional<double> tau21(const Jet& jet, double R) {
  const auto t1 = nsubjettiness(jet, 1, R);
  const auto t2 = nsubjettiness(jet, 2, R);
  if (!t1 || !t2) return std::nullopt;
  if (*t1 == 0.0) return 0.0;
  return *t2 / *t1;
}

std::string_view rejection_name(Rejection r) {
  switch (r) {
    case Rejection::kNone:
      return "accepted";
    case Rejection::kFewerThanTwoJets:
      return "fewer_than_two_jets";
    case Rejection::kTooFewConstituents:
      return "too_few_constituents";
    case Rejection::kOutsideWindow:
      return "outside_window";
  }
  return "unknown";
}

FeatureResult extract_features(std::span<const Particle> particles, double R, double eta_max) {
  const std::vector<Jet> all = cluster_antikt(particles, R);
  const std::vector<Jet> jets = filter_jets(all, eta_max);
  if (jets.size() < 2) return {std::nullopt, Rejection::kFewerThanTwoJets};
  const Jet& j1 = jets[0];
  const Jet& j2 = jets[1];
  const auto t1 = tau21(j1, R);
  const auto t2 = tau21(j2, R);
  if (!t1 || !t2) return {std::nullopt, Rejection::kTooFewConstituents};
  EventFeatures f;
  f.m_jj = invariant_mass_pair(j1, j2);
  f.m_j1 = j1.mass;
  f.m_j1_minus_m_j2 = j1.mass - j2.mass;
  f.tau21_j1 = *t1;
  f.tau21_j2 = *t2;
  return {f, Rejection::kNone};
}

}  // namespace gisad
