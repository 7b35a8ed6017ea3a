#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nnecon/economy.hpp"
#include "nnecon/errors.hpp"
#include "nnecon/rng.hpp"

namespace nnecon {

// Fully connected ReLU network, input (a, z), scalar output. Layers are
// stored as row-major out x in weight matrices plus bias vectors.
struct Mlp {
  std::vector<int> layer_sizes;                 // e.g. {2, 4, 4, 1}
  std::vector<std::vector<double>> weights;     // weights[l][o * in + i]
  std::vector<std::vector<double>> biases;      // biases[l][o]

  std::size_t n_layers() const { return weights.size(); }

  std::size_t n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  bool finite() const {
    for (const auto& w : weights)
      for (double v : w)
        if (!std::isfinite(v)) return false;
    for (const auto& b : biases)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

// Parameter-shaped container for gradients and optimizer moments.
struct MlpGrad {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGrad zeros_like(const Mlp& net) {
    MlpGrad g;
    g.weights.reserve(net.weights.size());
    g.biases.reserve(net.biases.size());
    for (const auto& w : net.weights) g.weights.emplace_back(w.size(), 0.0);
    for (const auto& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
  }

  void accumulate(const MlpGrad& other, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += scale * other.weights[l][i];
      for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += scale * other.biases[l][i];
    }
  }

  bool finite() const {
    for (const auto& w : weights)
      for (double v : w)
        if (!std::isfinite(v)) return false;
    for (const auto& b : biases)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

// Weights and biases uniform on +/- 1/sqrt(fan_in), layer by layer.
inline Mlp init_weights(const std::vector<int>& layer_sizes, Rng& rng) {
  if (layer_sizes.size() < 2) throw DomainError("init_weights: need at least input and output layer");
  for (int s : layer_sizes)
    if (s < 1) throw DomainError("init_weights: layer sizes must be positive");
  Mlp net;
  net.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    std::vector<double> b(fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    for (double& v : b) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

namespace detail {

struct ForwardTrace {
  // post[l] holds the activations leaving layer l (ReLU applied except last).
  std::vector<std::vector<double>> post;
  double output = 0.0;
};

inline ForwardTrace forward_trace(const Mlp& net, double a, double z) {
  ForwardTrace tr;
  tr.post.resize(net.n_layers());
  std::vector<double> in{a, z};
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const int n_out = net.layer_sizes[l + 1];
    const int n_in = net.layer_sizes[l];
    std::vector<double> out(n_out);
    const bool last = (l + 1 == net.n_layers());
    for (int o = 0; o < n_out; ++o) {
      double s = net.biases[l][o];
      const double* wrow = net.weights[l].data() + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) s += wrow[i] * in[i];
      out[o] = last ? s : std::max(0.0, s);  // ReLU'(0) treated as 0 downstream
    }
    tr.post[l] = out;
    in = std::move(out);
  }
  tr.output = tr.post.back()[0];
  return tr;
}

}  // namespace detail

// Raw network output phi(a, z).
inline double forward(const Mlp& net, double a, double z) {
  if (!net.finite()) throw NumericalError("forward: non-finite network parameter");
  return detail::forward_trace(net, a, z).output;
}

// Reverse-mode gradient of the scalar output with respect to every parameter.
inline MlpGrad grad_params(const Mlp& net, double a, double z) {
  const auto tr = detail::forward_trace(net, a, z);
  MlpGrad g = MlpGrad::zeros_like(net);

  const std::size_t L = net.n_layers();
  // delta[o] = d output / d preactivation of the current layer.
  std::vector<double> delta{1.0};
  for (std::size_t li = L; li-- > 0;) {
    const int n_out = net.layer_sizes[li + 1];
    const int n_in = net.layer_sizes[li];
    const std::vector<double> input =
        (li == 0) ? std::vector<double>{a, z} : tr.post[li - 1];
    for (int o = 0; o < n_out; ++o) {
      g.biases[li][o] = delta[o];
      double* grow = g.weights[li].data() + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) grow[i] = delta[o] * input[i];
    }
    if (li == 0) break;
    std::vector<double> prev(n_in, 0.0);
    for (int i = 0; i < n_in; ++i) {
      if (tr.post[li - 1][i] <= 0.0) continue;  // dead ReLU
      double s = 0.0;
      for (int o = 0; o < n_out; ++o) s += delta[o] * net.weights[li][static_cast<std::size_t>(o) * n_in + i];
      prev[i] = s;
    }
    delta = std::move(prev);
  }
  return g;
}

// Adam moment accumulators; ascent direction (maximization).
struct AdamState {
  MlpGrad m;
  MlpGrad v;
  long step_count = 0;
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const Mlp& net, double alpha) {
    AdamState st;
    st.m = MlpGrad::zeros_like(net);
    st.v = MlpGrad::zeros_like(net);
    st.alpha = alpha;
    return st;
  }
};

// One bias-corrected Adam step in the +gradient direction.
inline void adam_ascent_step(Mlp& net, AdamState& state, const MlpGrad& gradient) {
  if (!gradient.finite()) throw NumericalError("adam_ascent_step: non-finite gradient rejected");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    auto update = [&](std::vector<double>& params, std::vector<double>& m, std::vector<double>& v,
                      const std::vector<double>& g) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] += state.alpha * mhat / (std::sqrt(vhat) + state.eps);
      }
    };
    update(net.weights[l], state.m.weights[l], state.v.weights[l], gradient.weights[l]);
    update(net.biases[l], state.m.biases[l], state.v.biases[l], gradient.biases[l]);
  }
}

// target <- (1 - lambda) target + lambda source, elementwise.
inline void polyak_update(Mlp& target, const Mlp& source, double lambda) {
  if (target.layer_sizes != source.layer_sizes)
    throw DomainError("polyak_update: shape mismatch");
  for (std::size_t l = 0; l < target.n_layers(); ++l) {
    for (std::size_t i = 0; i < target.weights[l].size(); ++i)
      target.weights[l][i] = (1.0 - lambda) * target.weights[l][i] + lambda * source.weights[l][i];
    for (std::size_t i = 0; i < target.biases[l].size(); ++i)
      target.biases[l][i] = (1.0 - lambda) * target.biases[l][i] + lambda * source.biases[l][i];
  }
}

enum class ClipStatus : int { none = 0, floor = 1, cap = 2, consumption = 3 };

// Policy head shared by the live network and its target copy.
struct PolicyParams {
  Mlp network;       // theta
  Mlp target;        // slowly tracking copy
  double mu = 0.01;  // perturbation scale on the raw output
  double a_floor = 0.0;
  double a_cap = 50.0;
  double c_min = 0.0;  // minimal consumption, w * z_min
  double polyak_lambda = 0.01;

  void validate() const {
    if (!(a_floor < a_cap)) throw DomainError("PolicyParams: a_floor must be below a_cap");
    if (!(mu > 0.0)) throw DomainError("PolicyParams: mu must be > 0");
    if (!(polyak_lambda > 0.0 && polyak_lambda <= 1.0))
      throw DomainError("PolicyParams: polyak_lambda must be in (0, 1]");
    if (!(c_min > 0.0)) throw DomainError("PolicyParams: c_min must be > 0");
  }
};

struct PolicyAction {
  double next_assets = 0.0;
  ClipStatus clip = ClipStatus::none;
};

namespace detail {

// x = a + mu phi(a, z), then floor, cap and minimum-consumption clips in
// that order. Any active clip removes the dependence of x on theta.
inline PolicyAction clipped_action(const Mlp& net, double mu, double a_floor, double a_cap,
                                   double c_min, double a, double z, const Prices& prices) {
  PolicyAction act;
  double x = a + mu * forward(net, a, z);
  if (x < a_floor) {
    x = a_floor;
    act.clip = ClipStatus::floor;
  }
  if (x > a_cap) {
    x = a_cap;
    act.clip = ClipStatus::cap;
  }
  const double cash = (1.0 + prices.r) * a + prices.w * z;
  if (cash - x < c_min) {
    x = cash - c_min;
    act.clip = ClipStatus::consumption;
  }
  act.next_assets = x;
  return act;
}

}  // namespace detail

// Action of the live network's clipped policy.
inline PolicyAction policy_action(const PolicyParams& p, double a, double z, const Prices& prices) {
  return detail::clipped_action(p.network, p.mu, p.a_floor, p.a_cap, p.c_min, a, z, prices);
}

// Action of the target copy's clipped policy.
inline PolicyAction target_action(const PolicyParams& p, double a, double z, const Prices& prices) {
  return detail::clipped_action(p.target, p.mu, p.a_floor, p.a_cap, p.c_min, a, z, prices);
}

}  // namespace nnecon
