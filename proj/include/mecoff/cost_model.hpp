#pragma once

// Delay and cost model: local execution, offloading (transmission plus
// cloud execution), handover and drop terms, and the weighted per-epoch cost.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mecoff/scenario.hpp"
#include "mecoff/state.hpp"

namespace mecoff {

/// Raised when an action cannot be executed (frequency cap exceeded,
/// transmission equation unsolvable, energy not queued, ...).
class InfeasibleAction : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct CostBreakdown {
  double exec_delay_s = 0.0;  // 0, local delay or cloud delay
  double handover_s = 0.0;    // zeta or 0
  double drop = 0.0;          // drop term (indicator by default)
  double total_s = 0.0;       // exec + rho * handover + phi * drop
};

inline double energy_joules(int units, const SystemParams& p) { return units * p.energy_unit_j; }

inline double local_cpu_frequency(double energy_j, const SystemParams& p) {
  if (!(energy_j > 0.0)) throw std::invalid_argument("local_cpu_frequency: energy must be positive");
  return std::sqrt(energy_j / (p.switched_cap * p.task_bits * p.cycles_per_bit));
}

inline bool is_local_feasible(double energy_j, const SystemParams& p) {
  return energy_j > 0.0 && local_cpu_frequency(energy_j, p) <= p.f_local_max_hz;
}

inline double local_delay(double energy_j, const SystemParams& p) {
  const double f = local_cpu_frequency(energy_j, p);
  if (f > p.f_local_max_hz) throw InfeasibleAction("local execution exceeds the CPU frequency cap");
  return p.task_bits * p.cycles_per_bit / f;
}

/// Supremum of b * R(b) over transmission times b: W g E / (I ln 2).
inline double transmission_cap_bits(double gain_linear, double energy_j, const SystemParams& p) {
  return p.bandwidth_hz * gain_linear * energy_j / (p.interference_w * std::numbers::ln2);
}

inline bool is_transmission_feasible(double gain_linear, double energy_j, const SystemParams& p) {
  return gain_linear > 0.0 && energy_j > 0.0 && p.task_bits < transmission_cap_bits(gain_linear, energy_j, p);
}

/// Bits delivered within time b when energy E is spread over the task:
/// b W log2(1 + g E / (I b)). Strictly increasing in b.
inline double bits_delivered(double time_s, double gain_linear, double energy_j, const SystemParams& p) {
  const double snr = gain_linear * energy_j / (p.interference_w * time_s);
  return time_s * p.bandwidth_hz * std::log1p(snr) / std::numbers::ln2;
}

/// Unique b > 0 with b R(b) = mu, by bracketing and bisection.
inline double transmission_time(double gain_linear, double energy_j, const SystemParams& p) {
  if (!is_transmission_feasible(gain_linear, energy_j, p))
    throw InfeasibleAction("transmission cannot deliver the task: mu exceeds W g E / (I ln 2)");
  const double mu = p.task_bits;
  auto residual = [&](double b) { return bits_delivered(b, gain_linear, energy_j, p) - mu; };

  double hi = mu / p.bandwidth_hz;
  for (int i = 0; i < 2000 && residual(hi) < 0.0; ++i) hi *= 2.0;
  double lo = hi;
  for (int i = 0; i < 2000 && residual(lo) > 0.0; ++i) lo *= 0.5;
  if (residual(hi) < 0.0 || residual(lo) > 0.0) throw InfeasibleAction("transmission time could not be bracketed");

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = residual(mid);
    if (std::abs(r) <= 1e-13 * mu || mid == lo || mid == hi) break;
    (r < 0.0 ? lo : hi) = mid;
  }
  return mid;
}

inline double cloud_execution_delay(const SystemParams& p) { return p.task_bits * p.cycles_per_bit / p.f_cloud_hz; }

inline double cloud_delay(double gain_linear, double energy_j, const SystemParams& p) {
  return transmission_time(gain_linear, energy_j, p) + cloud_execution_delay(p);
}

inline double handover_delay(const NetworkState& state, const Action& action, const SystemParams& p) {
  const bool offload = action.target >= 1;
  const bool had_bs = state.last_bs != NetworkState::kNoBs;
  return offload && had_bs && action.target != state.last_bs ? p.handover_delay_s : 0.0;
}

/// 1 iff a present task is declined.
inline double drop_cost(const NetworkState& state, const Action& action) {
  return state.task_present && action.target == Action::kDrop ? 1.0 : 0.0;
}

/// Drop term under the scenario's configured reading.
inline double drop_term(const NetworkState& state, const Action& action, const ScenarioSpec& spec) {
  if (spec.params.drop_cost_mode == DropCostMode::ArrivalRate)
    return action.target == Action::kDrop ? spec.arrivals.task_rate : 0.0;
  return drop_cost(state, action);
}

/// Execution delay of the chosen path: 0 on drop, local or cloud delay.
inline double execution_delay(const NetworkState& state, const Action& action, const ScenarioSpec& spec) {
  const auto& p = spec.params;
  if (action.target == Action::kDrop) return 0.0;
  const double e = energy_joules(action.energy, p);
  if (action.target == Action::kLocal) return local_delay(e, p);
  const auto bs = static_cast<std::size_t>(action.target - 1);
  return cloud_delay(spec.channel.gain_linear(bs, static_cast<std::size_t>(state.gains[bs])), e, p);
}

inline CostBreakdown task_cost(const NetworkState& state, const Action& action, const ScenarioSpec& spec) {
  const auto& p = spec.params;
  CostBreakdown c;
  c.exec_delay_s = execution_delay(state, action, spec);
  c.handover_s = handover_delay(state, action, p);
  c.drop = drop_term(state, action, spec);
  c.total_s = c.exec_delay_s + p.handover_weight * c.handover_s + p.drop_weight * c.drop;
  return c;
}

}  // namespace mecoff
