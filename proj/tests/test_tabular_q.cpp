#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "mecoff/tabular_q.hpp"

namespace mecoff {
namespace {

Transition some_transition(const QTable& table, const ScenarioSpec& spec, std::uint64_t seed) {
  Environment env(spec, Rng(seed));
  env.reset(table.space()[seed % table.n_states()]);
  const auto acts = feasible_actions(env.state(), spec);
  return env.step(acts.back()).transition;
}

TEST(QUpdate, ZeroStepLeavesTableUnchanged) {
  const auto spec = desk_scenario();
  QTable table(spec);
  table.at(5, 0) = 0.25;
  const auto before = table;
  for (std::uint64_t k = 0; k < 50; ++k) q_update(table, some_transition(table, spec, k), 0.9, 0.0);
  EXPECT_EQ(table, before);
}

TEST(QUpdate, FullStepWithoutDiscountStoresCost) {
  const auto spec = desk_scenario();
  QTable table(spec);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto t = some_transition(table, spec, k);
    q_update(table, t, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(table.at(table.space().index_of(t.state), action_index(t.action, spec.params.h_max)), t.cost);
  }
}

TEST(QUpdate, HandComputedStep) {
  const auto spec = desk_scenario();
  QTable table(spec);
  const auto t = some_transition(table, spec, 3);
  const auto s = table.space().index_of(t.state);
  const auto a = action_index(t.action, spec.params.h_max);
  const auto s2 = table.space().index_of(t.next_state);
  for (auto i : table.feasible(s2)) table.at(s2, i) = 0.004 + 0.001 * static_cast<double>(i);
  table.at(s2, table.feasible(s2).back()) = 0.002;
  table.at(s, a) = 0.003;
  if (s == s2) GTEST_SKIP() << "self-loop sample";
  q_update(table, t, 0.9, 0.25);
  const double target = 0.1 * t.cost + 0.9 * 0.002;
  EXPECT_NEAR(table.at(s, a), 0.003 + 0.25 * (target - 0.003), 1e-15);
}

TEST(QTable, InfeasiblePairsAreInfiniteAndNeverGreedy) {
  const auto spec = desk_scenario();
  QTable table(spec);
  for (std::size_t s = 0; s < table.n_states(); ++s) {
    const auto mask = feasibility_mask(table.space()[s], spec);
    for (std::size_t a = 0; a < table.n_actions(); ++a) EXPECT_EQ(std::isinf(table.at(s, a)), mask[a] == 0);
    EXPECT_EQ(mask[table.greedy_index(s)], 1);
  }
}

TEST(EpsilonGreedy, FullExplorationIsUniformOverFeasibleActions) {
  const auto spec = desk_scenario();
  QTable table(spec);
  const NetworkState state{true, 2, {2, 2}, 1};
  const auto s = table.space().index_of(state);
  const auto feas = table.feasible(s);
  ASSERT_GE(feas.size(), 4u);
  Rng rng(17);
  std::map<std::size_t, int> counts;
  const int draws = 60'000;
  for (int k = 0; k < draws; ++k) ++counts[action_index(epsilon_greedy(table, state, 1.0, rng), spec.params.h_max)];
  EXPECT_EQ(counts.size(), feas.size());
  const double expected = static_cast<double>(draws) / static_cast<double>(feas.size());
  double chi2 = 0.0;
  for (auto a : feas) chi2 += std::pow(counts[a] - expected, 2) / expected;
  // 99.9% quantile of chi-square with up to 11 degrees of freedom is < 32
  EXPECT_LT(chi2, 32.0);
}

TEST(EpsilonGreedy, NoExplorationIsGreedy) {
  const auto spec = desk_scenario();
  QTable table(spec);
  const NetworkState state{true, 2, {2, 2}, 1};
  const auto s = table.space().index_of(state);
  table.at(s, table.feasible(s)[2]) = -1.0;
  Rng rng(1);
  for (int k = 0; k < 100; ++k)
    EXPECT_EQ(action_index(epsilon_greedy(table, state, 0.0, rng), spec.params.h_max), table.feasible(s)[2]);
}

TEST(TrainTabular, DeterministicAndCountsEveryEpoch) {
  const auto spec = desk_scenario();
  TabularConfig cfg;
  cfg.epochs = 20'000;
  cfg.seed = 5;
  const auto a = train_tabular(spec, cfg);
  const auto b = train_tabular(spec, cfg);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.table.total_visits(), cfg.epochs);
  ASSERT_EQ(a.curve.size(), 20u);
  EXPECT_EQ(a.curve.back().epoch, cfg.epochs);
  cfg.seed = 6;
  EXPECT_FALSE(train_tabular(spec, cfg).table == a.table);
}

TEST(TrainTabular, GreedyPolicyIsFeasible) {
  const auto spec = desk_scenario();
  TabularConfig cfg;
  cfg.epochs = 5'000;
  const auto r = train_tabular(spec, cfg);
  const auto policy = r.table.greedy_policy();
  for (std::size_t s = 0; s < r.table.n_states(); ++s) EXPECT_TRUE(is_feasible(r.table.space()[s], policy[s], spec));
}

TEST(TrainTabular, CurveCsvHeader) {
  const auto spec = desk_scenario();
  TabularConfig cfg;
  cfg.epochs = 2'000;
  const auto r = train_tabular(spec, cfg);
  const auto path = ::testing::TempDir() + "tabular_curve.csv";
  write_tabular_curve_csv(path, r.curve);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,running_avg_cost,epsilon,sup_change");
}

}  // namespace
}  // namespace mecoff
