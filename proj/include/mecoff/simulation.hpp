#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <vector>

#include "mecoff/dynamics.hpp"

namespace mecoff {

template <class P>
concept StatePolicy = requires(P p, const NetworkState& s) {
  { p(s) } -> std::convertible_to<Action>;
};

/// Long-run per-epoch averages of one simulated trajectory.
struct AverageCostEstimate {
  double cost = 0.0;
  double half_width = 0.0;  // 95% batch-means confidence half-width of `cost`
  double exec_delay = 0.0;
  double handovers = 0.0;   // handovers per epoch
  double drops = 0.0;       // mean drop term per epoch
  std::uint64_t epochs = 0;
};

/// Runs `policy` for `epochs` epochs from the standard initial state. The
/// same (spec, seed) gives every policy the same arrival and channel draws
/// as long as it consumes them identically, which keeps comparisons tight.
template <StatePolicy Policy>
AverageCostEstimate simulate_average_cost(const ScenarioSpec& spec, Policy&& policy, std::uint64_t epochs,
                                          std::uint64_t seed, std::uint64_t burn_in = 0) {
  Environment env(spec, Rng(seed, 7));
  for (std::uint64_t k = 0; k < burn_in; ++k) env.step(policy(env.state()));

  constexpr std::uint64_t kBatches = 100;
  const std::uint64_t batch_len = std::max<std::uint64_t>(1, epochs / kBatches);
  std::vector<double> batch_means;
  double batch_sum = 0.0;
  std::uint64_t in_batch = 0;

  AverageCostEstimate est;
  double cost = 0.0, delay = 0.0, handovers = 0.0, drops = 0.0;
  for (std::uint64_t k = 0; k < epochs; ++k) {
    const Action a = policy(env.state());
    if (!is_feasible(env.state(), a, spec)) throw InfeasibleAction("policy produced an infeasible action");
    const auto r = env.step(a);
    cost += r.cost.total_s;
    delay += r.cost.exec_delay_s;
    handovers += r.cost.handover_s > 0.0 ? 1.0 : 0.0;
    drops += r.cost.drop;
    batch_sum += r.cost.total_s;
    if (++in_batch == batch_len) {
      batch_means.push_back(batch_sum / static_cast<double>(batch_len));
      batch_sum = 0.0;
      in_batch = 0;
    }
  }
  if (epochs == 0) return est;
  const double n = static_cast<double>(epochs);
  est.epochs = epochs;
  est.cost = cost / n;
  est.exec_delay = delay / n;
  est.handovers = handovers / n;
  est.drops = drops / n;
  if (batch_means.size() >= 2) {
    double mean = 0.0;
    for (double m : batch_means) mean += m;
    mean /= static_cast<double>(batch_means.size());
    double var = 0.0;
    for (double m : batch_means) var += (m - mean) * (m - mean);
    var /= static_cast<double>(batch_means.size() - 1);
    est.half_width = 1.96 * std::sqrt(var / static_cast<double>(batch_means.size()));
  }
  return est;
}

}  // namespace mecoff
