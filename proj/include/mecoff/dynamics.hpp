#pragma once

// The controlled Markov chain: action feasibility, sampled transitions,
// exact transition probabilities and enumeration of the extended state space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/cost_model.hpp"
#include "mecoff/rng.hpp"
#include "mecoff/scenario.hpp"
#include "mecoff/state.hpp"

namespace mecoff {

class StateSpaceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr std::uint64_t kMaxEnumerableStates = 10'000'000;

inline bool is_valid_state(const NetworkState& s, const ScenarioSpec& spec) {
  const auto& p = spec.params;
  if (s.energy < 0 || s.energy > p.h_max) return false;
  if (s.gains.size() != spec.channel.n_bs()) return false;
  for (std::size_t n = 0; n < s.gains.size(); ++n)
    if (s.gains[n] < 0 || static_cast<std::size_t>(s.gains[n]) >= spec.channel.n_states(n)) return false;
  return s.last_bs >= NetworkState::kNoBs && s.last_bs <= p.n_bs;
}

inline bool is_feasible(const NetworkState& s, const Action& a, const SystemParams& p, const ChannelModel& channel) {
  if (a.target < Action::kDrop || a.target > p.n_bs) return false;
  if (a.energy < 0 || a.energy > s.energy) return false;
  if (a.target == Action::kDrop) return a.energy == 0;
  if (!s.task_present) return false;
  if (a.energy < 1) return false;
  const double e = energy_joules(a.energy, p);
  if (a.target == Action::kLocal) return is_local_feasible(e, p);
  const auto bs = static_cast<std::size_t>(a.target - 1);
  return is_transmission_feasible(channel.gain_linear(bs, static_cast<std::size_t>(s.gains[bs])), e, p);
}

inline bool is_feasible(const NetworkState& s, const Action& a, const ScenarioSpec& spec) {
  return is_feasible(s, a, spec.params, spec.channel);
}

/// Feasible actions in action-index order; never empty since (-1, 0) is
/// always allowed.
inline std::vector<Action> feasible_actions(const NetworkState& s, const SystemParams& p,
                                            const ChannelModel& channel) {
  std::vector<Action> out;
  const auto count = action_count(p.n_bs, p.h_max);
  for (std::size_t i = 0; i < count; ++i) {
    const auto a = action_from_index(i, p.h_max);
    if (is_feasible(s, a, p, channel)) out.push_back(a);
  }
  return out;
}

inline std::vector<Action> feasible_actions(const NetworkState& s, const ScenarioSpec& spec) {
  return feasible_actions(s, spec.params, spec.channel);
}

/// Per-action-index feasibility flags.
inline std::vector<std::uint8_t> feasibility_mask(const NetworkState& s, const ScenarioSpec& spec) {
  const auto count = action_count(spec.params.n_bs, spec.params.h_max);
  std::vector<std::uint8_t> mask(count, 0);
  for (std::size_t i = 0; i < count; ++i)
    mask[i] = is_feasible(s, action_from_index(i, spec.params.h_max), spec) ? 1 : 0;
  return mask;
}

struct SampledStep {
  NetworkState next_state;
  int energy_arrived = 0;
  bool task_arrived = false;
};

/// Draws the next state. Draw order per call is fixed (task, energy,
/// then one draw per BS), so the result depends only on the rng position.
inline SampledStep sample_transition(const NetworkState& s, const Action& a, const ScenarioSpec& spec, Rng& rng) {
  if (!is_feasible(s, a, spec)) throw InfeasibleAction("sample_transition: infeasible action");
  SampledStep out;
  out.task_arrived = rng.bernoulli(spec.arrivals.task_rate);
  out.energy_arrived = rng.poisson(spec.arrivals.energy_rate);

  auto& next = out.next_state;
  next.task_present = out.task_arrived;
  next.energy = std::min(s.energy - a.energy + out.energy_arrived, spec.params.h_max);
  next.gains.resize(s.gains.size());
  for (std::size_t n = 0; n < s.gains.size(); ++n) {
    const auto row = spec.channel.transition_matrices[n].row(static_cast<std::size_t>(s.gains[n]));
    next.gains[n] = static_cast<int>(rng.categorical(row));
  }
  next.last_bs = a.target >= 1 ? a.target : s.last_bs;
  return out;
}

inline double poisson_pmf(int k, double mean) {
  if (k < 0) return 0.0;
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

/// P(X >= k) for X ~ Poisson(mean).
inline double poisson_upper_tail(int k, double mean) {
  if (k <= 0) return 1.0;
  double below = 0.0;
  for (int i = 0; i < k; ++i) below += poisson_pmf(i, mean);
  return std::max(0.0, 1.0 - below);
}

/// Probability of the energy queue moving from h to h_next after spending e.
inline double energy_transition_probability(int h, int e, int h_next, int h_max, double mean) {
  const int base = h - e;
  if (h_next < base || h_next > h_max) return 0.0;
  if (h_next < h_max) return poisson_pmf(h_next - base, mean);
  return poisson_upper_tail(h_max - base, mean);
}

inline double transition_probability(const NetworkState& s, const Action& a, const NetworkState& next,
                                     const ScenarioSpec& spec) {
  const int expected_last = a.target >= 1 ? a.target : s.last_bs;
  if (next.last_bs != expected_last) return 0.0;
  double prob = 1.0;
  for (std::size_t n = 0; n < s.gains.size(); ++n)
    prob *= spec.channel.transition_matrices[n](static_cast<std::size_t>(s.gains[n]),
                                                static_cast<std::size_t>(next.gains[n]));
  prob *= next.task_present ? spec.arrivals.task_rate : 1.0 - spec.arrivals.task_rate;
  prob *= energy_transition_probability(s.energy, a.energy, next.energy, spec.params.h_max,
                                        spec.arrivals.energy_rate);
  return prob;
}

/// Lexicographic enumeration of the extended state space with digits
/// (task, energy, gain_1..gain_N, last_bs), most significant first.
class StateSpace {
 public:
  explicit StateSpace(const ScenarioSpec& spec) : h_max_(spec.params.h_max), n_bs_(spec.params.n_bs) {
    const auto size = state_space_size(spec, true);
    if (size > kMaxEnumerableStates)
      throw StateSpaceTooLarge("extended state space has " + std::to_string(size) + " states (limit " +
                               std::to_string(kMaxEnumerableStates) + ")");
    for (std::size_t n = 0; n < spec.channel.n_bs(); ++n) gain_radix_.push_back(spec.channel.n_states(n));
    states_.reserve(size);
    for (std::uint64_t i = 0; i < size; ++i) states_.push_back(decode(i));
  }

  std::size_t size() const noexcept { return states_.size(); }
  const NetworkState& operator[](std::size_t i) const noexcept { return states_[i]; }
  const std::vector<NetworkState>& states() const noexcept { return states_; }
  auto begin() const noexcept { return states_.begin(); }
  auto end() const noexcept { return states_.end(); }

  std::size_t index_of(const NetworkState& s) const {
    std::size_t idx = s.task_present ? 1 : 0;
    idx = idx * static_cast<std::size_t>(h_max_ + 1) + static_cast<std::size_t>(s.energy);
    for (std::size_t n = 0; n < gain_radix_.size(); ++n) idx = idx * gain_radix_[n] + static_cast<std::size_t>(s.gains[n]);
    return idx * static_cast<std::size_t>(n_bs_ + 1) + static_cast<std::size_t>(s.last_bs);
  }

 private:
  NetworkState decode(std::uint64_t idx) const {
    NetworkState s;
    s.last_bs = static_cast<int>(idx % static_cast<std::uint64_t>(n_bs_ + 1));
    idx /= static_cast<std::uint64_t>(n_bs_ + 1);
    s.gains.resize(gain_radix_.size());
    for (std::size_t n = gain_radix_.size(); n-- > 0;) {
      s.gains[n] = static_cast<int>(idx % gain_radix_[n]);
      idx /= gain_radix_[n];
    }
    s.energy = static_cast<int>(idx % static_cast<std::uint64_t>(h_max_ + 1));
    s.task_present = idx / static_cast<std::uint64_t>(h_max_ + 1) != 0;
    return s;
  }

  int h_max_;
  int n_bs_;
  std::vector<std::size_t> gain_radix_;
  std::vector<NetworkState> states_;
};

/// Starting state: task drawn from the arrival law, empty energy queue,
/// channel indices uniform, no serving BS yet.
inline NetworkState initial_state(const ScenarioSpec& spec, Rng& rng) {
  NetworkState s;
  s.task_present = rng.bernoulli(spec.arrivals.task_rate);
  s.energy = 0;
  for (std::size_t n = 0; n < spec.channel.n_bs(); ++n)
    s.gains.push_back(static_cast<int>(rng.below(spec.channel.n_states(n))));
  s.last_bs = NetworkState::kNoBs;
  return s;
}

struct StepResult {
  Transition transition;
  CostBreakdown cost;
};

/// Stateful wrapper that walks the chain one epoch at a time.
class Environment {
 public:
  Environment(const ScenarioSpec& spec, Rng rng) : spec_(&spec), rng_(rng), state_(initial_state(spec, rng_)) {}

  const NetworkState& state() const noexcept { return state_; }
  const ScenarioSpec& spec() const noexcept { return *spec_; }
  Rng& rng() noexcept { return rng_; }
  void reset(NetworkState s) { state_ = std::move(s); }

  StepResult step(const Action& a) {
    StepResult r;
    r.cost = task_cost(state_, a, *spec_);
    auto sampled = sample_transition(state_, a, *spec_, rng_);
    r.transition = {state_, a, r.cost.total_s, sampled.next_state};
    state_ = std::move(sampled.next_state);
    return r;
  }

 private:
  const ScenarioSpec* spec_;
  Rng rng_;
  NetworkState state_;
};

}  // namespace mecoff
