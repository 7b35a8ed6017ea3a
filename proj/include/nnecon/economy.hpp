#pragma once

#include <cmath>

#include "nnecon/errors.hpp"
#include "nnecon/markov.hpp"

namespace nnecon {

// CRRA preferences. gamma = 1 (log utility) is rejected: the closed forms
// used downstream assume gamma != 1.
struct Preferences {
  double beta = 0.96;
  double gamma = 2.0;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("Preferences: beta must be in (0, 1)");
    if (!(gamma > 0.0)) throw DomainError("Preferences: gamma must be > 0");
    if (gamma == 1.0) throw DomainError("Preferences: gamma = 1 not supported");
  }
};

// Cobb-Douglas technology with depreciation.
struct Technology {
  double alpha = 0.33;
  double delta = 0.10;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("Technology: alpha must be in (0, 1)");
    if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("Technology: delta must be in (0, 1]");
  }
};

struct Prices {
  double r = 0.0;  // interest rate per period
  double w = 1.0;  // wage per efficiency unit

  void validate() const {
    if (!(r > -1.0)) throw DomainError("Prices: r must be > -1");
    if (!(w > 0.0)) throw DomainError("Prices: w must be > 0");
  }
};

// u(c) = c^(1-gamma) / (1-gamma), c > 0.
inline double utility(double c, const Preferences& prefs) {
  if (!(c > 0.0)) throw DomainError("utility: consumption must be > 0");
  return std::pow(c, 1.0 - prefs.gamma) / (1.0 - prefs.gamma);
}

// u'(c) = c^(-gamma).
inline double marginal_utility(double c, const Preferences& prefs) {
  if (!(c > 0.0)) throw DomainError("marginal_utility: consumption must be > 0");
  return std::pow(c, -prefs.gamma);
}

// Competitive factor prices from aggregates: r = alpha K^(alpha-1) L^(1-alpha) - delta,
// w = (1-alpha) K^alpha L^(-alpha).
inline Prices prices_from_capital(double K, double L, const Technology& tech) {
  tech.validate();
  if (!(K > 0.0)) throw DomainError("prices_from_capital: K must be > 0");
  if (!(L > 0.0)) throw DomainError("prices_from_capital: L must be > 0");
  Prices p;
  p.r = tech.alpha * std::pow(K, tech.alpha - 1.0) * std::pow(L, 1.0 - tech.alpha) - tech.delta;
  p.w = (1.0 - tech.alpha) * std::pow(K, tech.alpha) * std::pow(L, -tech.alpha);
  return p;
}

// Capital demand implied by an interest rate: inverts r = alpha (K/L)^(alpha-1) - delta.
inline double capital_from_interest_rate(double r, double L, const Technology& tech) {
  tech.validate();
  if (!(r + tech.delta > 0.0)) throw DomainError("capital_from_interest_rate: r + delta must be > 0");
  return L * std::pow(tech.alpha / (r + tech.delta), 1.0 / (1.0 - tech.alpha));
}

// Aggregate efficiency units under the chain's stationary distribution.
inline double labor_supply(const MarkovChain& chain) {
  const auto p = stationary_distribution(chain);
  double L = 0.0;
  for (std::size_t i = 0; i < chain.size(); ++i) L += p[i] * chain.states[i];
  return L;
}

}  // namespace nnecon
