#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nnecon/errors.hpp"
#include "nnecon/rng.hpp"

namespace nnecon {

// AR(1) in logs: ln z' = rho ln z + sigma eps, eps ~ N(0,1).
struct ArOneSpec {
  double rho = 0.6;      // persistence, 0 <= rho < 1
  double sigma = 0.3;    // innovation standard deviation
  int n_states = 20;     // grid size
  double width = 3.0;    // half-width in unconditional std deviations

  void validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("ArOneSpec: rho must be in [0, 1)");
    if (!(sigma > 0.0)) throw DomainError("ArOneSpec: sigma must be > 0");
    if (n_states < 1) throw DomainError("ArOneSpec: n_states must be >= 1");
    if (!(width > 0.0)) throw DomainError("ArOneSpec: width must be > 0");
  }
};

// Discrete productivity process: level grid and row-stochastic transition.
struct MarkovChain {
  std::vector<double> states;                    // z levels, strictly increasing
  std::vector<std::vector<double>> transition;   // transition[i][j] = P(j | i)

  std::size_t size() const { return states.size(); }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Tauchen (finite-state approximation): equally spaced log grid on
// +/- width * sigma / sqrt(1 - rho^2), transitions from normal CDF differences.
inline MarkovChain tauchen_discretize(const ArOneSpec& spec) {
  spec.validate();
  const int n = spec.n_states;
  MarkovChain chain;
  chain.states.resize(n);
  chain.transition.assign(n, std::vector<double>(n, 0.0));

  if (n == 1) {
    chain.states[0] = 1.0;  // exp(0)
    chain.transition[0][0] = 1.0;
    return chain;
  }

  const double sd_uncond = spec.sigma / std::sqrt(1.0 - spec.rho * spec.rho);
  const double top = spec.width * sd_uncond;
  const double step = 2.0 * top / (n - 1);

  std::vector<double> log_grid(n);
  for (int i = 0; i < n; ++i) log_grid[i] = -top + step * i;

  for (int i = 0; i < n; ++i) {
    const double mean = spec.rho * log_grid[i];
    for (int j = 0; j < n; ++j) {
      const double lo = (log_grid[j] - mean - 0.5 * step) / spec.sigma;
      const double hi = (log_grid[j] - mean + 0.5 * step) / spec.sigma;
      if (j == 0) {
        chain.transition[i][j] = normal_cdf(hi);
      } else if (j == n - 1) {
        chain.transition[i][j] = 1.0 - normal_cdf(lo);
      } else {
        chain.transition[i][j] = normal_cdf(hi) - normal_cdf(lo);
      }
    }
  }
  for (int i = 0; i < n; ++i) chain.states[i] = std::exp(log_grid[i]);
  return chain;
}

namespace detail {

// Reachability over edges with positive probability, from `start`,
// following rows (forward = true) or columns.
inline std::vector<bool> reachable(const MarkovChain& chain, std::size_t start, bool forward) {
  const std::size_t n = chain.size();
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      const double p = forward ? chain.transition[i][j] : chain.transition[j][i];
      if (p > 0.0 && !seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

inline bool irreducible(const MarkovChain& chain) {
  const auto fwd = reachable(chain, 0, true);
  const auto bwd = reachable(chain, 0, false);
  for (std::size_t i = 0; i < chain.size(); ++i)
    if (!fwd[i] || !bwd[i]) return false;
  return true;
}

}  // namespace detail

// Fixed point of p -> p Gamma by power iteration.
inline std::vector<double> stationary_distribution(const MarkovChain& chain,
                                                   double tol = 1e-12,
                                                   long max_iters = 1000000) {
  const std::size_t n = chain.size();
  if (n == 0) throw DomainError("stationary_distribution: empty chain");
  if (!detail::irreducible(chain))
    throw NumericalError("stationary_distribution: chain is reducible");

  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  double diff = 0.0;
  for (long iter = 0; iter < max_iters; ++iter) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += p[i] * chain.transition[i][j];
      next[j] = s;
    }
    diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(next[j] - p[j]));
    p.swap(next);
    if (diff < tol) {
      double total = 0.0;
      for (double v : p) total += v;
      for (double& v : p) v /= total;
      return p;
    }
  }
  throw NumericalError("stationary_distribution: no convergence, residual " + std::to_string(diff));
}

// One step of the chain from `current`, using the caller's stream.
inline std::size_t sample_next(const MarkovChain& chain, std::size_t current, Rng& rng) {
  if (current >= chain.size()) throw DomainError("sample_next: state index out of range");
  return rng.categorical(chain.transition[current]);
}

}  // namespace nnecon
