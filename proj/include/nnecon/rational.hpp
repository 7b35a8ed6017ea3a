#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nnecon/economy.hpp"
#include "nnecon/errors.hpp"
#include "nnecon/markov.hpp"

namespace nnecon {

// Asset grid with the liquidity floor as its first node.
struct AssetGrid {
  std::vector<double> points;

  std::size_t size() const { return points.size(); }
  double floor() const { return points.front(); }
  double max() const { return points.back(); }

  // n points on [a_min, a_max], spacing proportional to the square of the
  // index so nodes concentrate near the liquidity floor.
  static AssetGrid squared(double a_min, double a_max, int n) {
    if (n < 2) throw DomainError("AssetGrid: need at least 2 points");
    if (!(a_max > a_min)) throw DomainError("AssetGrid: a_max must exceed a_min");
    AssetGrid g;
    g.points.resize(n);
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / (n - 1);
      g.points[i] = a_min + (a_max - a_min) * t * t;
    }
    g.points[0] = a_min;
    g.points[n - 1] = a_max;
    return g;
  }

  // Index of the cell [points[k], points[k+1]] containing a (clamped).
  std::size_t cell(double a) const {
    const auto it = std::upper_bound(points.begin(), points.end(), a);
    auto k = static_cast<std::size_t>(it - points.begin());
    if (k == 0) return 0;
    if (k >= points.size()) return points.size() - 2;
    return k - 1;
  }
};

// Optimal saving rule and value function on the (a, z) grid.
struct RationalPolicy {
  AssetGrid grid;
  MarkovChain chain;
  std::vector<double> savings;  // [ia * n_z + iz]
  std::vector<double> value;    // [ia * n_z + iz]

  // Counts interpolation queries clamped because a fell outside the grid.
  mutable std::atomic<std::uint64_t> off_grid_clamps{0};

  RationalPolicy() = default;
  RationalPolicy(const RationalPolicy& other)
      : grid(other.grid), chain(other.chain), savings(other.savings), value(other.value) {
    off_grid_clamps.store(other.off_grid_clamps.load());
  }
  RationalPolicy& operator=(const RationalPolicy& other) {
    if (this != &other) {
      grid = other.grid;
      chain = other.chain;
      savings = other.savings;
      value = other.value;
      off_grid_clamps.store(other.off_grid_clamps.load());
    }
    return *this;
  }

  std::size_t n_assets() const { return grid.size(); }
  std::size_t n_z() const { return chain.size(); }
  double saving_at(std::size_t ia, std::size_t iz) const { return savings[ia * n_z() + iz]; }
  double value_at(std::size_t ia, std::size_t iz) const { return value[ia * n_z() + iz]; }
};

// Joint stationary mass over (asset node, productivity state).
struct WealthDistribution {
  std::size_t n_assets = 0;
  std::size_t n_z = 0;
  std::vector<double> mass;  // [ia * n_z + iz]

  double at(std::size_t ia, std::size_t iz) const { return mass[ia * n_z + iz]; }

  std::vector<double> asset_marginal() const {
    std::vector<double> m(n_assets, 0.0);
    for (std::size_t ia = 0; ia < n_assets; ++ia)
      for (std::size_t iz = 0; iz < n_z; ++iz) m[ia] += at(ia, iz);
    return m;
  }
};

struct VfiOptions {
  double tol = 1e-9;           // sup-norm value change, relative normalization
  int max_rounds = 2000;       // policy improvement rounds
  int howard_sweeps = 50;      // evaluation sweeps per improvement
  bool allow_top_binding = false;
};

struct VfiInfo {
  int rounds = 0;
  double final_change = 0.0;
  bool top_binding = false;
  bool beta_r_at_least_one = false;
};

// Piecewise-linear policy interpolation in a at fixed z; out-of-grid
// queries are clamped and counted on the policy's diagnostics counter.
inline double interpolate_policy(const RationalPolicy& policy, double a, std::size_t z_index) {
  if (z_index >= policy.n_z()) throw DomainError("interpolate_policy: z index out of range");
  const auto& pts = policy.grid.points;
  if (a < pts.front() || a > pts.back()) {
    policy.off_grid_clamps.fetch_add(1, std::memory_order_relaxed);
    a = std::clamp(a, pts.front(), pts.back());
  }
  const std::size_t k = policy.grid.cell(a);
  const double t = (a - pts[k]) / (pts[k + 1] - pts[k]);
  const double lo = policy.saving_at(k, z_index);
  const double hi = policy.saving_at(k + 1, z_index);
  return std::clamp(lo + t * (hi - lo), pts.front(), pts.back());
}

// beta (1+r) u'(c_next) / u'(c_now) - 1.
inline double euler_error(double c_now, double c_next, const Prices& prices,
                          const Preferences& prefs) {
  return prefs.beta * (1.0 + prices.r) * marginal_utility(c_next, prefs) /
             marginal_utility(c_now, prefs) -
         1.0;
}

namespace detail {

// Linear interpolation of a column [ia * n_z + iz] over the asset grid.
inline double interp_column(const AssetGrid& grid, const std::vector<double>& table,
                            std::size_t n_z, std::size_t iz, double a) {
  const auto& pts = grid.points;
  const std::size_t k = grid.cell(a);
  const double t = (a - pts[k]) / (pts[k + 1] - pts[k]);
  return table[k * n_z + iz] * (1.0 - t) + table[(k + 1) * n_z + iz] * t;
}

// Golden-section maximum of a concave objective on [lo, hi].
template <typename F>
double golden_max(F&& f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// Value function iteration with continuous choice (golden-section over the
// linearly interpolated continuation value) and Howard evaluation sweeps.
inline std::pair<RationalPolicy, VfiInfo> solve_vfi(const Prices& prices, const MarkovChain& chain,
                                                    const AssetGrid& grid, const Preferences& prefs,
                                                    const VfiOptions& opts = {},
                                                    const std::vector<double>* warm_value = nullptr) {
  prices.validate();
  prefs.validate();
  const std::size_t n_a = grid.size();
  const std::size_t n_z = chain.size();
  const double a_lo = grid.floor();
  const double a_hi = grid.max();
  const double beta = prefs.beta;

  VfiInfo info;
  info.beta_r_at_least_one = beta * (1.0 + prices.r) >= 1.0;

  std::vector<double> cash(n_a * n_z);
  for (std::size_t ia = 0; ia < n_a; ++ia)
    for (std::size_t iz = 0; iz < n_z; ++iz)
      cash[ia * n_z + iz] = (1.0 + prices.r) * grid.points[ia] + prices.w * chain.states[iz];

  std::vector<double> V(n_a * n_z);
  if (warm_value && warm_value->size() == V.size()) {
    V = *warm_value;
  } else {
    // Inertial start: consume income forever.
    for (std::size_t ia = 0; ia < n_a; ++ia)
      for (std::size_t iz = 0; iz < n_z; ++iz) {
        const double c = cash[ia * n_z + iz] - grid.points[ia];
        V[ia * n_z + iz] = utility(std::max(c, 1e-12), prefs) / (1.0 - beta);
      }
  }

  std::vector<double> EV(n_a * n_z);
  std::vector<double> policy(n_a * n_z, a_lo);
  std::vector<double> V_new(n_a * n_z);

  auto compute_ev = [&]() {
    for (std::size_t ia = 0; ia < n_a; ++ia)
      for (std::size_t iz = 0; iz < n_z; ++iz) {
        double s = 0.0;
        const auto& row = chain.transition[iz];
        for (std::size_t k = 0; k < n_z; ++k) s += row[k] * V[ia * n_z + k];
        EV[ia * n_z + iz] = s;
      }
  };

  const double c_eps = 1e-10;  // keeps consumption strictly positive
  double change = 0.0;
  int round = 0;
  for (; round < opts.max_rounds; ++round) {
    compute_ev();

    // Improvement sweep; optimal saving is nondecreasing in a, so the
    // previous node's choice bounds the search from below.
    for (std::size_t iz = 0; iz < n_z; ++iz) {
      double lower = a_lo;
      for (std::size_t ia = 0; ia < n_a; ++ia) {
        const double m = cash[ia * n_z + iz];
        const double hi = std::min(a_hi, m - c_eps);
        if (hi <= a_lo) {
          policy[ia * n_z + iz] = a_lo;
          continue;
        }
        const double lo = std::min(lower, hi);
        auto objective = [&](double ap) {
          return utility(m - ap, prefs) + beta * detail::interp_column(grid, EV, n_z, iz, ap);
        };
        double best = detail::golden_max(objective, lo, hi, 1e-10);
        // Compare against the exact corner: golden section cannot land on it.
        if (objective(a_lo) >= objective(best)) best = a_lo;
        policy[ia * n_z + iz] = best;
        lower = best;
      }
    }

    // Evaluation sweeps holding the policy fixed.
    for (int sweep = 0; sweep < std::max(1, opts.howard_sweeps); ++sweep) {
      compute_ev();
      for (std::size_t ia = 0; ia < n_a; ++ia)
        for (std::size_t iz = 0; iz < n_z; ++iz) {
          const double ap = policy[ia * n_z + iz];
          const double c = std::max(cash[ia * n_z + iz] - ap, c_eps);
          V_new[ia * n_z + iz] =
              utility(c, prefs) + beta * detail::interp_column(grid, EV, n_z, iz, ap);
        }
      V.swap(V_new);
    }

    change = 0.0;
    double vmax = 0.0;
    for (std::size_t i = 0; i < V.size(); ++i) {
      change = std::max(change, std::abs(V[i] - V_new[i]));  // V_new holds previous sweep
      vmax = std::max(vmax, std::abs(V[i]));
    }
    change /= 1.0 + vmax;
    if (change < opts.tol) break;
  }
  info.rounds = round;
  info.final_change = change;
  if (round >= opts.max_rounds)
    throw NumericalError("solve_vfi: no convergence after " + std::to_string(opts.max_rounds) +
                         " rounds, relative change " + std::to_string(change));

  // Monotone cleanup of numerically tiny inversions from the line search.
  for (std::size_t iz = 0; iz < n_z; ++iz)
    for (std::size_t ia = 1; ia < n_a; ++ia)
      policy[ia * n_z + iz] = std::max(policy[ia * n_z + iz], policy[(ia - 1) * n_z + iz]);

  for (std::size_t iz = 0; iz < n_z; ++iz) {
    if (policy[(n_a - 1) * n_z + iz] >= a_hi - 1e-8) {
      info.top_binding = true;
      if (!opts.allow_top_binding)
        throw NumericalError("solve_vfi: policy binds at the top of the asset grid; "
                             "increase the grid maximum");
    }
  }

  RationalPolicy result;
  result.grid = grid;
  result.chain = chain;
  result.savings = std::move(policy);
  result.value = std::move(V);
  return {std::move(result), info};
}

// Stationary joint distribution of (a, z) under the policy. Off-grid savings
// are split between neighboring nodes as a mean-preserving two-point lottery.
inline WealthDistribution stationary_wealth(const RationalPolicy& policy, const MarkovChain& chain,
                                            double tol = 1e-12, long max_iters = 400000,
                                            const WealthDistribution* warm_start = nullptr) {
  const std::size_t n_a = policy.n_assets();
  const std::size_t n_z = chain.size();
  const auto& pts = policy.grid.points;

  std::vector<std::size_t> node(n_a * n_z);
  std::vector<double> weight(n_a * n_z);
  for (std::size_t ia = 0; ia < n_a; ++ia)
    for (std::size_t iz = 0; iz < n_z; ++iz) {
      const double ap = std::clamp(policy.saving_at(ia, iz), pts.front(), pts.back());
      const std::size_t k = policy.grid.cell(ap);
      node[ia * n_z + iz] = k;
      weight[ia * n_z + iz] = std::clamp((pts[k + 1] - ap) / (pts[k + 1] - pts[k]), 0.0, 1.0);
    }

  WealthDistribution dist;
  dist.n_assets = n_a;
  dist.n_z = n_z;
  if (warm_start && warm_start->mass.size() == n_a * n_z) {
    dist.mass = warm_start->mass;
  } else {
    dist.mass.assign(n_a * n_z, 0.0);
    const auto pz = stationary_distribution(chain);
    for (std::size_t iz = 0; iz < n_z; ++iz) dist.mass[iz] = pz[iz];
  }

  std::vector<double> moved(n_a * n_z);
  std::vector<double> next(n_a * n_z);
  for (long iter = 0; iter < max_iters; ++iter) {
    std::fill(moved.begin(), moved.end(), 0.0);
    for (std::size_t ia = 0; ia < n_a; ++ia)
      for (std::size_t iz = 0; iz < n_z; ++iz) {
        const double m = dist.mass[ia * n_z + iz];
        if (m == 0.0) continue;
        const std::size_t k = node[ia * n_z + iz];
        const double w = weight[ia * n_z + iz];
        moved[k * n_z + iz] += m * w;
        moved[(k + 1) * n_z + iz] += m * (1.0 - w);
      }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t ia = 0; ia < n_a; ++ia)
      for (std::size_t iz = 0; iz < n_z; ++iz) {
        const double m = moved[ia * n_z + iz];
        if (m == 0.0) continue;
        const auto& row = chain.transition[iz];
        for (std::size_t k = 0; k < n_z; ++k) next[ia * n_z + k] += m * row[k];
      }
    double tv = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) tv += std::abs(next[i] - dist.mass[i]);
    tv *= 0.5;
    dist.mass.swap(next);
    if (tv < tol) return dist;
  }
  throw NumericalError("stationary_wealth: no convergence after " + std::to_string(max_iters) +
                       " iterations");
}

struct Equilibrium {
  Prices prices;
  RationalPolicy policy;
  WealthDistribution distribution;
  double capital = 0.0;  // demand-side K at the equilibrium rate
  double labor = 0.0;
  double capital_supply = 0.0;
  int bisection_steps = 0;
};

// Bisection on the interest rate until capital demand matches the stationary
// capital supply within 1e-4 relative.
inline Equilibrium find_equilibrium(const Technology& tech, const Preferences& prefs,
                                    const MarkovChain& chain, const AssetGrid& grid,
                                    double r_lo = 0.0, double r_hi = 0.0,
                                    double rel_tol = 1e-4) {
  tech.validate();
  prefs.validate();
  const double L = labor_supply(chain);
  if (r_lo == 0.0 && r_hi == 0.0) {
    r_lo = -tech.delta + 1e-4;
    r_hi = 1.0 / prefs.beta - 1.0 - 1e-4;
  }

  std::vector<double> warm_value;
  WealthDistribution warm_dist;
  double last_gap = 0.0;

  // Excess capital supply at rate r.
  auto excess = [&](double r, Equilibrium* out) {
    const double K = capital_from_interest_rate(r, L, tech);
    const Prices prices = prices_from_capital(K, L, tech);
    VfiOptions opts;
    opts.allow_top_binding = true;  // tolerated while probing, not at the solution
    auto [policy, info] = solve_vfi(prices, chain, grid, prefs, opts,
                                    warm_value.empty() ? nullptr : &warm_value);
    warm_value = policy.value;
    auto dist = stationary_wealth(policy, chain, 1e-12, 400000,
                                  warm_dist.mass.empty() ? nullptr : &warm_dist);
    warm_dist = dist;
    double supply = 0.0;
    for (std::size_t ia = 0; ia < policy.n_assets(); ++ia) {
      const auto marginal_row = ia * chain.size();
      for (std::size_t iz = 0; iz < chain.size(); ++iz)
        supply += policy.grid.points[ia] * dist.mass[marginal_row + iz];
    }
    last_gap = std::abs(supply - K) / K;
    if (out) {
      out->prices = prices;
      out->policy = std::move(policy);
      out->distribution = std::move(dist);
      out->capital = K;
      out->labor = L;
      out->capital_supply = supply;
    }
    return supply - K;
  };

  double g_lo = excess(r_lo, nullptr);
  double g_hi = excess(r_hi, nullptr);
  if (!(g_lo < 0.0 && g_hi > 0.0))
    throw ConfigError("find_equilibrium: bracket does not straddle market clearing");

  Equilibrium eq;
  for (int step = 1; step <= 100; ++step) {
    const double mid = 0.5 * (r_lo + r_hi);
    const double g = excess(mid, &eq);
    eq.bisection_steps = step;
    if (last_gap < rel_tol) {
      // Re-run strict at the solution so a binding grid top is an error.
      VfiOptions strict;
      auto [policy, info] = solve_vfi(eq.prices, chain, grid, prefs, strict, &warm_value);
      eq.policy = std::move(policy);
      return eq;
    }
    (g < 0.0 ? r_lo : r_hi) = mid;
  }
  throw NumericalError("find_equilibrium: bisection failed to reach tolerance");
}

// Euler-equation residual of an arbitrary saving rule at (a, z_index):
// beta (1+r) E[u'(c')] / u'(c) - 1 with the expectation over the chain row.
template <typename PolicyFn>
double euler_residual_on_policy(PolicyFn&& pi, double a, std::size_t iz, const Prices& prices,
                                const Preferences& prefs, const MarkovChain& chain) {
  const double ap = pi(a, iz);
  const double c = (1.0 + prices.r) * a + prices.w * chain.states[iz] - ap;
  if (!(c > 0.0)) throw DomainError("euler_residual_on_policy: nonpositive consumption");
  double emu = 0.0;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const double app = pi(ap, k);
    const double cn = (1.0 + prices.r) * ap + prices.w * chain.states[k] - app;
    if (!(cn > 0.0)) throw DomainError("euler_residual_on_policy: nonpositive next consumption");
    emu += chain.transition[iz][k] * marginal_utility(cn, prefs);
  }
  return prefs.beta * (1.0 + prices.r) * emu / marginal_utility(c, prefs) - 1.0;
}

}  // namespace nnecon
