#pragma once

// Exact dynamic programming on small instances: value iteration on the
// Bellman optimality equation, Q from V, greedy policies and policy
// evaluation. Values carry the (1 - gamma) normalization so they share
// units with per-epoch costs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/dynamics.hpp"
#include "mecoff/simulation.hpp"

namespace mecoff {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse tabulation of costs and transition probabilities for every
/// feasible (state, action) pair of the extended state space.
class MdpModel {
 public:
  struct Choice {
    std::size_t action = 0;  // action index
    double cost = 0.0;       // per-epoch cost p(x, y), seconds
    std::uint32_t begin = 0, end = 0;
  };

  explicit MdpModel(const ScenarioSpec& spec) : spec_(&spec), space_(spec) {
    const auto& p = spec.params;
    n_actions_ = action_count(p.n_bs, p.h_max);
    offsets_.reserve(space_.size() + 1);
    offsets_.push_back(0);
    NetworkState next;
    for (const auto& s : space_) {
      for (const auto& a : feasible_actions(s, spec)) {
        Choice c;
        c.action = action_index(a, p.h_max);
        c.cost = task_cost(s, a, spec).total_s;
        c.begin = static_cast<std::uint32_t>(next_.size());
        // Support: last_bs is determined; everything else may move.
        next.last_bs = a.target >= 1 ? a.target : s.last_bs;
        next.gains.assign(s.gains.size(), 0);
        for (int task = 0; task <= 1; ++task) {
          next.task_present = task != 0;
          for (int h = std::max(0, s.energy - a.energy); h <= p.h_max; ++h) {
            next.energy = h;
            std::fill(next.gains.begin(), next.gains.end(), 0);
            for (;;) {
              const double prob = transition_probability(s, a, next, spec);
              if (prob > 0.0) {
                next_.push_back(static_cast<std::uint32_t>(space_.index_of(next)));
                prob_.push_back(prob);
              }
              std::size_t n = 0;
              for (; n < next.gains.size(); ++n) {
                if (static_cast<std::size_t>(++next.gains[n]) < spec.channel.n_states(n)) break;
                next.gains[n] = 0;
              }
              if (n == next.gains.size()) break;
            }
          }
        }
        c.end = static_cast<std::uint32_t>(next_.size());
        choices_.push_back(c);
      }
      offsets_.push_back(static_cast<std::uint32_t>(choices_.size()));
    }
  }

  const ScenarioSpec& spec() const noexcept { return *spec_; }
  const StateSpace& space() const noexcept { return space_; }
  std::size_t n_states() const noexcept { return space_.size(); }
  std::size_t n_actions() const noexcept { return n_actions_; }
  double discount() const noexcept { return spec_->params.discount; }

  std::span<const Choice> choices(std::size_t state) const noexcept {
    return {choices_.data() + offsets_[state], choices_.data() + offsets_[state + 1]};
  }

  double expected_next(const Choice& c, std::span<const double> values) const noexcept {
    double acc = 0.0;
    for (auto k = c.begin; k < c.end; ++k) acc += prob_[k] * values[next_[k]];
    return acc;
  }

  /// (1 - gamma) p + gamma E[V(x')]
  double backup(const Choice& c, std::span<const double> values) const noexcept {
    const double g = discount();
    return (1.0 - g) * c.cost + g * expected_next(c, values);
  }

  const Choice* find(std::size_t state, std::size_t action) const noexcept {
    for (const auto& c : choices(state))
      if (c.action == action) return &c;
    return nullptr;
  }

  std::span<const std::uint32_t> successors(const Choice& c) const noexcept {
    return {next_.data() + c.begin, next_.data() + c.end};
  }
  std::span<const double> probabilities(const Choice& c) const noexcept {
    return {prob_.data() + c.begin, prob_.data() + c.end};
  }

  double max_cost() const noexcept {
    double m = 0.0;
    for (const auto& c : choices_) m = std::max(m, c.cost);
    return m;
  }

 private:
  const ScenarioSpec* spec_;
  StateSpace space_;
  std::size_t n_actions_ = 0;
  std::vector<std::uint32_t> offsets_;
  std::vector<Choice> choices_;
  std::vector<std::uint32_t> next_;
  std::vector<double> prob_;
};

struct ValueTable {
  std::vector<double> values;
  std::size_t iterations = 0;
  double residual = 0.0;                // sup-norm change of the last sweep
  std::vector<double> residual_history;  // one entry per sweep
};

/// Stationary policy as one action per enumerated state.
struct PolicyTable {
  std::vector<Action> actions;

  const Action& operator[](std::size_t i) const noexcept { return actions[i]; }
};

/// Per-(state, action-index) values; infeasible pairs hold +infinity.
struct QValues {
  std::size_t n_actions = 0;
  std::vector<double> values;

  double operator()(std::size_t state, std::size_t action) const noexcept {
    return values[state * n_actions + action];
  }
};

inline constexpr double kInfeasibleQ = std::numeric_limits<double>::infinity();

/// Lowest index whose value is within a relative 1e-12 of the minimum.
inline std::size_t argmin_with_ties(std::span<const double> q) {
  double best = std::numeric_limits<double>::infinity();
  for (double v : q) best = std::min(best, v);
  const double slack = 1e-12 * std::abs(best);
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] <= best + slack) return i;
  return 0;
}

inline ValueTable value_iteration(const MdpModel& model, double tol = 1e-9, std::size_t max_iters = 100'000) {
  ValueTable t;
  std::vector<double> v(model.n_states(), 0.0), fresh(model.n_states());
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double residual = 0.0;
    for (std::size_t s = 0; s < model.n_states(); ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : model.choices(s)) best = std::min(best, model.backup(c, v));
      fresh[s] = best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    v.swap(fresh);
    t.residual_history.push_back(residual);
    t.iterations = it;
    t.residual = residual;
    if (residual <= tol) {
      t.values = std::move(v);
      return t;
    }
  }
  throw ConvergenceError("value iteration did not converge in " + std::to_string(max_iters) +
                         " sweeps (residual " + std::to_string(t.residual) + ")");
}

inline ValueTable value_iteration(const ScenarioSpec& spec, double tol = 1e-9, std::size_t max_iters = 100'000) {
  return value_iteration(MdpModel(spec), tol, max_iters);
}

inline QValues q_from_v(const MdpModel& model, std::span<const double> values) {
  QValues q;
  q.n_actions = model.n_actions();
  q.values.assign(model.n_states() * q.n_actions, kInfeasibleQ);
  for (std::size_t s = 0; s < model.n_states(); ++s)
    for (const auto& c : model.choices(s)) q.values[s * q.n_actions + c.action] = model.backup(c, values);
  return q;
}

inline PolicyTable greedy_policy(const MdpModel& model, std::span<const double> values) {
  const auto q = q_from_v(model, values);
  PolicyTable policy;
  policy.actions.reserve(model.n_states());
  const auto h_max = model.spec().params.h_max;
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    std::span<const double> row(q.values.data() + s * q.n_actions, q.n_actions);
    policy.actions.push_back(action_from_index(argmin_with_ties(row), h_max));
  }
  return policy;
}

/// Tabulates any state -> action callable over the enumerated space.
template <StatePolicy Policy>
PolicyTable tabulate(const StateSpace& space, Policy&& policy) {
  PolicyTable t;
  t.actions.reserve(space.size());
  for (const auto& s : space) t.actions.push_back(policy(s));
  return t;
}

/// Fixed point of the policy-restricted Bellman operator.
inline ValueTable policy_values(const MdpModel& model, const PolicyTable& policy, double tol = 1e-9,
                                std::size_t max_iters = 100'000) {
  const auto h_max = model.spec().params.h_max;
  std::vector<const MdpModel::Choice*> chosen(model.n_states());
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    chosen[s] = model.find(s, action_index(policy[s], h_max));
    if (!chosen[s]) throw InfeasibleAction("policy selects an infeasible action in state " + std::to_string(s));
  }
  ValueTable t;
  std::vector<double> v(model.n_states(), 0.0), fresh(model.n_states());
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double residual = 0.0;
    for (std::size_t s = 0; s < model.n_states(); ++s) {
      fresh[s] = model.backup(*chosen[s], v);
      residual = std::max(residual, std::abs(fresh[s] - v[s]));
    }
    v.swap(fresh);
    t.residual_history.push_back(residual);
    t.iterations = it;
    t.residual = residual;
    if (residual <= tol) {
      t.values = std::move(v);
      return t;
    }
  }
  throw ConvergenceError("policy evaluation did not converge in " + std::to_string(max_iters) + " sweeps");
}

/// Exact long-run average cost per epoch, from the stationary law of the
/// lazy chain (same stationary law, guaranteed aperiodic) started at the
/// standard initial distribution.
inline double stationary_average_cost(const MdpModel& model, const PolicyTable& policy) {
  const auto& spec = model.spec();
  const auto h_max = spec.params.h_max;
  std::vector<const MdpModel::Choice*> chosen(model.n_states());
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    chosen[s] = model.find(s, action_index(policy[s], h_max));
    if (!chosen[s]) throw InfeasibleAction("policy selects an infeasible action in state " + std::to_string(s));
  }
  std::vector<double> dist(model.n_states(), 0.0), next(model.n_states());
  double gain_count = 1.0;
  for (std::size_t n = 0; n < spec.channel.n_bs(); ++n) gain_count *= static_cast<double>(spec.channel.n_states(n));
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    const auto& st = model.space()[s];
    if (st.energy != 0 || st.last_bs != NetworkState::kNoBs) continue;
    dist[s] = (st.task_present ? spec.arrivals.task_rate : 1.0 - spec.arrivals.task_rate) / gain_count;
  }
  for (int it = 0; it < 1'000'000; ++it) {
    for (std::size_t s = 0; s < model.n_states(); ++s) next[s] = 0.5 * dist[s];
    for (std::size_t s = 0; s < model.n_states(); ++s) {
      if (dist[s] == 0.0) continue;
      const auto succ = model.successors(*chosen[s]);
      const auto prob = model.probabilities(*chosen[s]);
      for (std::size_t k = 0; k < succ.size(); ++k) next[succ[k]] += 0.5 * dist[s] * prob[k];
    }
    double diff = 0.0;
    for (std::size_t s = 0; s < model.n_states(); ++s) diff += std::abs(next[s] - dist[s]);
    dist.swap(next);
    if (diff < 1e-14) break;
  }
  double avg = 0.0;
  for (std::size_t s = 0; s < model.n_states(); ++s) avg += dist[s] * chosen[s]->cost;
  return avg;
}

struct PolicyEvaluation {
  ValueTable values;
  AverageCostEstimate average;  // simulated long-run average per epoch
};

inline PolicyEvaluation evaluate_policy(const MdpModel& model, const PolicyTable& policy, double tol = 1e-9,
                                        std::uint64_t sim_epochs = 1'000'000, std::uint64_t seed = 1) {
  PolicyEvaluation e;
  e.values = policy_values(model, policy, tol);
  const auto& space = model.space();
  e.average = simulate_average_cost(
      model.spec(), [&](const NetworkState& s) { return policy[space.index_of(s)]; }, sim_epochs, seed);
  return e;
}

/// Writes one row per state: index, state digits, V and the greedy action.
inline void write_value_csv(const std::string& path, const MdpModel& model, std::span<const double> values,
                            const PolicyTable& policy) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "state,task,energy";
  for (std::size_t n = 0; n < model.spec().channel.n_bs(); ++n) out << ",gain_" << n + 1;
  out << ",last_bs,value,target,alloc_energy\n";
  for (std::size_t s = 0; s < model.n_states(); ++s) {
    const auto& st = model.space()[s];
    out << s << ',' << (st.task_present ? 1 : 0) << ',' << st.energy;
    for (int g : st.gains) out << ',' << g;
    out << ',' << st.last_bs << ',' << csv_number(values[s]) << ',' << policy[s].target << ',' << policy[s].energy << '\n';
  }
}

}  // namespace mecoff
