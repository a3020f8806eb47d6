#pragma once

// Reference policies: always local, always offload via the best channel,
// and myopic minimum-delay choice between the two.

#include <string>
#include <string_view>

#include "mecoff/cost_model.hpp"
#include "mecoff/dynamics.hpp"

namespace mecoff {

enum class PolicyKind { Local, Cloud, Greedy, TabularGreedy, DqnGreedy, Oracle };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Local: return "local";
    case PolicyKind::Cloud: return "cloud";
    case PolicyKind::Greedy: return "greedy";
    case PolicyKind::TabularGreedy: return "tabular";
    case PolicyKind::DqnGreedy: return "dqn";
    case PolicyKind::Oracle: return "oracle";
  }
  return "unknown";
}

inline PolicyKind parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::Local, PolicyKind::Cloud, PolicyKind::Greedy, PolicyKind::TabularGreedy,
                 PolicyKind::DqnGreedy, PolicyKind::Oracle})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

inline constexpr Action kIdle{Action::kDrop, 0};

/// Spends as much queued energy as the local frequency cap allows.
inline Action local_policy(const NetworkState& s, const ScenarioSpec& spec) {
  if (!s.task_present) return kIdle;
  for (int e = s.energy; e >= 1; --e)
    if (is_local_feasible(energy_joules(e, spec.params), spec.params)) return {Action::kLocal, e};
  return kIdle;
}

/// Offloads with all queued energy via the BS with the best current gain
/// (lowest id on ties).
inline Action cloud_policy(const NetworkState& s, const ScenarioSpec& spec) {
  if (!s.task_present || s.energy == 0) return kIdle;
  std::size_t best = 0;
  for (std::size_t n = 1; n < s.gains.size(); ++n)
    if (spec.channel.gain_linear(n, static_cast<std::size_t>(s.gains[n])) >
        spec.channel.gain_linear(best, static_cast<std::size_t>(s.gains[best])))
      best = n;
  const double g = spec.channel.gain_linear(best, static_cast<std::size_t>(s.gains[best]));
  if (!is_transmission_feasible(g, energy_joules(s.energy, spec.params), spec.params)) return kIdle;
  return {static_cast<int>(best) + 1, s.energy};
}

/// Smaller of the Local and Cloud baselines' execution delays; handover
/// is ignored. Ties go to local execution.
inline Action greedy_policy_baseline(const NetworkState& s, const ScenarioSpec& spec) {
  const Action local = local_policy(s, spec);
  const Action cloud = cloud_policy(s, spec);
  const bool has_local = local.target == Action::kLocal;
  const bool has_cloud = cloud.target >= 1;
  if (!has_local && !has_cloud) return kIdle;
  if (!has_cloud) return local;
  if (!has_local) return cloud;
  return execution_delay(s, cloud, spec) < execution_delay(s, local, spec) ? cloud : local;
}

inline Action baseline_action(PolicyKind kind, const NetworkState& s, const ScenarioSpec& spec) {
  switch (kind) {
    case PolicyKind::Local: return local_policy(s, spec);
    case PolicyKind::Cloud: return cloud_policy(s, spec);
    case PolicyKind::Greedy: return greedy_policy_baseline(s, spec);
    default: throw std::invalid_argument("not a baseline policy: " + std::string(to_string(kind)));
  }
}

}  // namespace mecoff
