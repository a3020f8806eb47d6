#pragma once

// Tabular Q-learning with epsilon-greedy exploration over the enumerated
// extended state space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecoff/dynamics.hpp"
#include "mecoff/exact_solver.hpp"
#include "mecoff/metrics.hpp"

namespace mecoff {

/// Q(x, y) per (state index, action index) with visit counts. Infeasible
/// pairs hold +infinity and are never selected.
class QTable {
 public:
  explicit QTable(const ScenarioSpec& spec)
      : space_(spec), h_max_(spec.params.h_max), n_actions_(action_count(spec.params.n_bs, spec.params.h_max)) {
    values_.assign(space_.size() * n_actions_, kInfeasibleQ);
    visits_.assign(space_.size() * n_actions_, 0);
    feasible_.resize(space_.size());
    for (std::size_t s = 0; s < space_.size(); ++s) {
      for (const auto& a : feasible_actions(space_[s], spec)) {
        const auto i = action_index(a, h_max_);
        values_[s * n_actions_ + i] = 0.0;
        feasible_[s].push_back(i);
      }
    }
  }

  const StateSpace& space() const noexcept { return space_; }
  std::size_t n_states() const noexcept { return space_.size(); }
  std::size_t n_actions() const noexcept { return n_actions_; }
  int h_max() const noexcept { return h_max_; }

  double& at(std::size_t s, std::size_t a) noexcept { return values_[s * n_actions_ + a]; }
  double at(std::size_t s, std::size_t a) const noexcept { return values_[s * n_actions_ + a]; }
  std::span<const double> row(std::size_t s) const noexcept { return {values_.data() + s * n_actions_, n_actions_}; }
  std::span<const std::size_t> feasible(std::size_t s) const noexcept { return feasible_[s]; }

  std::uint64_t visits(std::size_t s, std::size_t a) const noexcept { return visits_[s * n_actions_ + a]; }
  std::uint64_t record_visit(std::size_t s, std::size_t a) noexcept { return ++visits_[s * n_actions_ + a]; }
  std::uint64_t total_visits() const noexcept {
    std::uint64_t t = 0;
    for (auto v : visits_) t += v;
    return t;
  }

  double min_value(std::size_t s) const noexcept {
    double m = std::numeric_limits<double>::infinity();
    for (auto a : feasible_[s]) m = std::min(m, at(s, a));
    return m;
  }

  std::size_t greedy_index(std::size_t s) const { return argmin_with_ties(row(s)); }
  Action greedy_action(const NetworkState& state) const {
    return action_from_index(greedy_index(space_.index_of(state)), h_max_);
  }

  PolicyTable greedy_policy() const {
    PolicyTable p;
    for (std::size_t s = 0; s < n_states(); ++s) p.actions.push_back(action_from_index(greedy_index(s), h_max_));
    return p;
  }

  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const QTable& o) const { return values_ == o.values_ && visits_ == o.visits_; }

 private:
  StateSpace space_;
  int h_max_;
  std::size_t n_actions_;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
  std::vector<std::vector<std::size_t>> feasible_;
};

/// Q(x,y) <- Q(x,y) + alpha ((1 - gamma) p + gamma min_y' Q(x', y') - Q(x,y)).
inline void q_update(QTable& table, const Transition& t, double gamma, double alpha) {
  const auto s = table.space().index_of(t.state);
  const auto a = action_index(t.action, table.h_max());
  const double target = (1.0 - gamma) * t.cost + gamma * table.min_value(table.space().index_of(t.next_state));
  double& q = table.at(s, a);
  q += alpha * (target - q);
}

inline Action epsilon_greedy(const QTable& table, const NetworkState& state, double epsilon, Rng& rng) {
  const auto s = table.space().index_of(state);
  if (rng.uniform() < epsilon) {
    const auto feas = table.feasible(s);
    return action_from_index(feas[rng.below(feas.size())], table.h_max());
  }
  return action_from_index(table.greedy_index(s), table.h_max());
}

struct TabularConfig {
  std::uint64_t epochs = 500'000;
  double lr_exponent = 0.6;           // alpha = 1 / (1 + visits)^lr_exponent
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double epsilon_anneal_fraction = 0.5;
  std::uint64_t episode_length = 10;  // restart period from a uniform state, 0: never
  std::uint64_t curve_every = 1000;  // learning-curve sampling period
  bool record_metrics = false;       // keep a MetricsRow per epoch
  std::uint64_t seed = 1;
};

struct TabularCurveRow {
  std::uint64_t epoch = 0;
  double running_avg_cost = 0.0;
  double epsilon = 0.0;
  double sup_change = 0.0;  // largest |delta Q| applied since the previous row
};

struct TabularResult {
  QTable table;
  std::vector<TabularCurveRow> curve;
  std::vector<MetricsRow> metrics;  // empty unless record_metrics
  std::uint64_t epochs = 0;
};

inline double linear_epsilon(std::uint64_t epoch, std::uint64_t anneal_epochs, double start, double end) {
  if (anneal_epochs == 0 || epoch >= anneal_epochs) return end;
  return start + (end - start) * static_cast<double>(epoch) / static_cast<double>(anneal_epochs);
}

inline TabularResult train_tabular(const ScenarioSpec& spec, const TabularConfig& cfg) {
  TabularResult r{QTable(spec), {}, {}, 0};
  MetricsRecorder recorder;
  auto& table = r.table;
  Environment env(spec, Rng(cfg.seed, 1));
  Rng explore(cfg.seed, 2);
  Rng restart(cfg.seed, 3);
  const auto anneal = static_cast<std::uint64_t>(cfg.epsilon_anneal_fraction * static_cast<double>(cfg.epochs));
  const double gamma = spec.params.discount;

  double cost_sum = 0.0, window_change = 0.0;
  for (std::uint64_t k = 0; k < cfg.epochs; ++k) {
    if (cfg.episode_length > 0 && k % cfg.episode_length == 0)
      env.reset(table.space()[restart.below(table.n_states())]);
    const double eps = linear_epsilon(k, anneal, cfg.epsilon_start, cfg.epsilon_end);
    const Action a = epsilon_greedy(table, env.state(), eps, explore);
    const auto step = env.step(a);
    const auto s = table.space().index_of(step.transition.state);
    const auto ai = action_index(a, table.h_max());
    const auto n = table.record_visit(s, ai);
    const double alpha = 1.0 / std::pow(1.0 + static_cast<double>(n), cfg.lr_exponent);
    const double before = table.at(s, ai);
    q_update(table, step.transition, gamma, alpha);
    window_change = std::max(window_change, std::abs(table.at(s, ai) - before));
    cost_sum += step.cost.total_s;
    if (cfg.record_metrics) recorder.record(step.cost, std::numeric_limits<double>::quiet_NaN(), eps);
    if (cfg.curve_every > 0 && ((k + 1) % cfg.curve_every == 0 || k + 1 == cfg.epochs)) {
      r.curve.push_back({k + 1, cost_sum / static_cast<double>(k + 1), eps, window_change});
      window_change = 0.0;
    }
  }
  r.epochs = cfg.epochs;
  r.metrics = recorder.take();
  return r;
}

inline void write_tabular_curve_csv(const std::string& path, std::span<const TabularCurveRow> curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "epoch,running_avg_cost,epsilon,sup_change\n";
  for (const auto& row : curve)
    out << row.epoch << ',' << csv_number(row.running_avg_cost) << ',' << csv_number(row.epsilon) << ','
        << csv_number(row.sup_change) << '\n';
}

}  // namespace mecoff
