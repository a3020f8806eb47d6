#include <gtest/gtest.h>

#include <fstream>

#include "mecoff/baselines.hpp"
#include "mecoff/metrics.hpp"
#include "mecoff/simulation.hpp"

namespace mecoff {
namespace {

TEST(Baselines, AlwaysFeasible) {
  const auto spec = desk_scenario(4);
  for (const auto& s : StateSpace(spec))
    for (auto kind : {PolicyKind::Local, PolicyKind::Cloud, PolicyKind::Greedy})
      EXPECT_TRUE(is_feasible(s, baseline_action(kind, s, spec), spec));
}

TEST(Baselines, LocalSpendsLargestFeasibleEnergy) {
  const auto spec = build_scenario(1, {{"h_max", "6"}});
  const NetworkState s{true, 6, {0, 0, 0, 0, 0, 0}, 0};
  EXPECT_EQ(local_policy(s, spec), (Action{Action::kLocal, 4}));  // 5 units exceed the CPU cap
  EXPECT_EQ(local_policy({true, 0, s.gains, 0}, spec), kIdle);
  EXPECT_EQ(local_policy({false, 6, s.gains, 0}, spec), kIdle);
}

TEST(Baselines, CloudUsesBestGainLowestIdOnTies) {
  const auto spec = build_scenario(1);
  EXPECT_EQ(cloud_policy({true, 3, {1, 5, 2, 5, 0, 0}, 0}, spec), (Action{2, 3}));
  EXPECT_EQ(cloud_policy({true, 3, {7, 7, 7, 7, 7, 7}, 4}, spec), (Action{1, 3}));
  EXPECT_EQ(cloud_policy({true, 0, {7, 7, 7, 7, 7, 7}, 4}, spec), kIdle);
}

TEST(Baselines, GreedyPicksSmallerExecutionDelay) {
  const auto spec = desk_scenario();
  for (const auto& s : StateSpace(spec)) {
    const auto g = greedy_policy_baseline(s, spec);
    const auto l = local_policy(s, spec), c = cloud_policy(s, spec);
    if (g == kIdle) {
      EXPECT_EQ(l, kIdle);
      EXPECT_EQ(c, kIdle);
      continue;
    }
    if (l != kIdle) {
      EXPECT_LE(execution_delay(s, g, spec), execution_delay(s, l, spec));
    }
    if (c != kIdle) {
      EXPECT_LE(execution_delay(s, g, spec), execution_delay(s, c, spec));
    }
  }
}

TEST(Baselines, PolicyNames) {
  for (auto kind : {PolicyKind::Local, PolicyKind::Cloud, PolicyKind::Greedy, PolicyKind::TabularGreedy,
                    PolicyKind::DqnGreedy, PolicyKind::Oracle})
    EXPECT_EQ(parse_policy_kind(to_string(kind)), kind);
  EXPECT_THROW(parse_policy_kind("random"), std::invalid_argument);
  EXPECT_THROW(baseline_action(PolicyKind::Oracle, {}, desk_scenario()), std::invalid_argument);
}

TEST(Metrics, PrefixMeansAndDecomposition) {
  const auto spec = desk_scenario(1, {{"energy_rate", "0.8"}});
  Environment env(spec, Rng(2));
  MetricsRecorder rec;
  double sum = 0.0;
  for (int k = 0; k < 5000; ++k) {
    const auto c = env.step(greedy_policy_baseline(env.state(), spec)).cost;
    const auto row = rec.record(c, 0.5, 0.1);
    sum += c.total_s;
    EXPECT_NEAR(row.avg_cost, sum / (k + 1), 1e-15);
    const double rebuilt = row.avg_exec_delay + spec.params.handover_weight * spec.params.handover_delay_s * row.avg_handover +
                           spec.params.drop_weight * row.avg_drop;
    EXPECT_NEAR(row.avg_cost, rebuilt, 1e-12);
  }
  EXPECT_EQ(rec.rows().size(), 5000u);
}

TEST(Metrics, CsvHeaderAndBlankLoss) {
  MetricsRecorder rec;
  rec.record({1e-4, 0.0, 0.0, 1e-4});
  rec.record({2e-4, 0.0, 0.0, 2e-4}, 0.25, 0.5);
  const auto path = ::testing::TempDir() + "mecoff_metrics.csv";
  write_metrics_csv(path, rec.rows());
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, kMetricsHeader);
  EXPECT_EQ(header,
            "epoch,cost,exec_delay,handover_count,drop_count,avg_cost,avg_exec_delay,avg_handover_count,"
            "avg_drop_count,loss,epsilon");
  EXPECT_NE(first.find(",,0"), std::string::npos);  // NaN loss written as an empty field
  EXPECT_EQ(second.substr(second.rfind(',') + 1), "0.5");
}

TEST(Metrics, MovingAverage) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_EQ(moving_average(v, 2), (std::vector<double>{1, 1.5, 2.5, 3.5, 4.5}));
  EXPECT_EQ(moving_average(v, 10), (std::vector<double>{1, 1.5, 2, 2.5, 3}));
}

TEST(Simulation, DeterministicAndRejectsInfeasiblePolicies) {
  const auto spec = desk_scenario();
  auto pol = [&](const NetworkState& s) { return local_policy(s, spec); };
  const auto a = simulate_average_cost(spec, pol, 20'000, 3);
  const auto b = simulate_average_cost(spec, pol, 20'000, 3);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_GT(a.half_width, 0.0);
  EXPECT_THROW(simulate_average_cost(spec, [](const NetworkState&) { return Action{0, 9}; }, 100, 1),
               InfeasibleAction);
}

}  // namespace
}  // namespace mecoff
